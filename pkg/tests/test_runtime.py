import csv

import numpy as np
import pytest

from fdisynth.errors import DimensionMismatch, UnstableFilter, ValidationError
from fdisynth.factorizations import FilterPair
from fdisynth.lss import static
from fdisynth.runtime import (
    FaultEvent,
    Scenario,
    Signal,
    calibrate_threshold,
    decide,
    evaluate_residual,
    simulate,
)
from fdisynth.synthesis import SynthesisModel, synth_afd, synth_afdi, synth_amm, synth_efd

from helpers import random_model, tf1


def s(M):
    return static(np.atleast_2d(np.asarray(M, dtype=float)))


AFD_MODEL = SynthesisModel.from_parts(Gd=s([[1], [1]]), Gf=s([[1], [0]]))
HALF_NOISE = SynthesisModel.from_parts(Gf=s([[1]]), Gw=s([[1]]))


def test_theta_examples():
    assert np.allclose(evaluate_residual(np.full((50, 1), -3.0)), 3.0)
    assert np.allclose(evaluate_residual(np.zeros((10, 2)), blocks=(1, 1)), 0.0)
    t = np.arange(4000) * 0.01
    theta = evaluate_residual(np.sin(2 * np.pi * t)[:, None], window=2000)
    assert theta[-1, 0] == pytest.approx(1 / np.sqrt(2), abs=1e-3)


def test_theta_per_block():
    r = np.column_stack([np.ones(30), 3 * np.ones(30), 4 * np.ones(30)])
    th = evaluate_residual(r, window=5, blocks=(1, 2))
    assert np.allclose(th[-1], [1.0, 5.0])


def test_decide_rule():
    assert decide(np.array([[0.1, 0.5]]), [0.2, 0.5]).tolist() == [[0, 0]]
    assert decide(np.array([[0.3, 0.6]]), [0.2, 0.5]).tolist() == [[1, 1]]


def test_zero_residual_without_faults():
    rng = np.random.default_rng(0)
    M = random_model(rng, n=3, p=3, dims=(1, 1, 1, 0))
    r = synth_efd(M)
    sc = Scenario(10.0, 0.01, u=(Signal("sinusoid", 2.0, 0.0, 0.3),),
                  d=(Signal("step", 1.5, 1.0),))
    tr = simulate(M, r.filter, sc, tau=1e-8)
    assert np.abs(tr.r).max() <= 1e-8
    assert not tr.iota.any()


def test_static_step_fault_response():
    r = synth_efd(AFD_MODEL)
    sc = Scenario(3.0, 0.01, d=(Signal("ramp", 1.0),), faults=(FaultEvent(0, 1.0, "step", 2.0),))
    tr = simulate(AFD_MODEL, r.filter, sc, tau=1e-9, window=1)
    k = int(round(1.0 / 0.01))
    gain = r.filter.Rf.D[0, 0]
    assert np.allclose(tr.r[:k], 0, atol=1e-12)
    assert np.allclose(tr.r[k:, 0], 2.0 * gain)
    assert tr.iota[:k].sum() == 0 and tr.iota[k:].all()


def test_zero_noise_threshold_fires_on_any_fault():
    r = synth_efd(AFD_MODEL)
    sc = Scenario(2.0, 0.01, faults=(FaultEvent(0, 1.0, "step", 1e-3),))
    tau = calibrate_threshold(AFD_MODEL, r.filter, sc)
    assert np.all(tau == 0)
    assert simulate(AFD_MODEL, r.filter, sc, tau=tau).iota[-1].all()


def test_threshold_bound_and_determinism():
    F = synth_amm(HALF_NOISE).filter
    assert np.allclose(F.Rw.D, 0.5)
    sc = Scenario(5.0, 0.01, noise_bound=1.0, seed=3)
    tau = calibrate_threshold(HALF_NOISE, F, sc, margin=0.2, seed=4)
    assert tau[0] <= 1.2 * 0.5
    assert np.array_equal(tau, calibrate_threshold(HALF_NOISE, F, sc, margin=0.2, seed=4))
    tr = simulate(HALF_NOISE, F, sc, tau=tau, seed=4)
    assert not tr.iota.any()


def test_redecide_is_bit_exact():
    r = synth_afd(HALF_NOISE)
    sc = Scenario(3.0, 0.01, faults=(FaultEvent(0, 1.0, "ramp", 0.5),), noise_bound=0.3)
    tr = simulate(HALF_NOISE, r.filter, sc, tau=[0.2])
    assert np.array_equal(tr.redecide(), tr.iota)
    assert np.array_equal(tr.redecide([0.4]), decide(tr.theta, [0.4]))


def test_linearity_in_fault_amplitude():
    rng = np.random.default_rng(5)
    M = random_model(rng, n=3, p=2, dims=(0, 1, 1, 0))
    F = synth_efd(M).filter
    one = simulate(M, F, Scenario(5.0, 0.01, faults=(FaultEvent(0, 1.0, "step", 1.0),)))
    two = simulate(M, F, Scenario(5.0, 0.01, faults=(FaultEvent(0, 1.0, "step", 2.0),)))
    assert np.allclose(two.r, 2 * one.r, rtol=1e-9, atol=1e-14)


def test_exact_discretization_of_first_order_filter():
    model = SynthesisModel.from_parts(Gf=s([[1]]))
    Q = tf1([1], [1, 1])
    F = FilterPair(Q, 1, 0, 0)
    sc = Scenario(5.0, 0.05, faults=(FaultEvent(0, 0.0, "step", 1.0),))
    tr = simulate(model, F.with_sys(Q), sc)
    # a step is constant between samples, so the sampled response is exact
    expected = 1 - np.exp(-tr.t)
    assert np.allclose(tr.r[:, 0], expected, atol=1e-6)


def test_unstable_filter_refused():
    model = SynthesisModel.from_parts(Gf=s([[1]]))
    with pytest.raises(UnstableFilter):
        simulate(model, tf1([1], [1, -1]), Scenario(1.0, 0.1))


def test_scenario_validation():
    with pytest.raises(ValidationError):
        Scenario(1.0, 0.0)
    with pytest.raises(ValidationError):
        Scenario(1.0, 0.1, faults=(FaultEvent(0, 5.0),))
    with pytest.raises(ValidationError):
        Signal("square")
    with pytest.raises(DimensionMismatch):
        simulate(AFD_MODEL, synth_efd(AFD_MODEL).filter,
                 Scenario(1.0, 0.1, faults=(FaultEvent(3, 0.5),)))


def test_isolation_signature_noise_free():
    rng = np.random.default_rng(6)
    M = random_model(rng, n=3, p=3, dims=(1, 1, 2, 0))
    res = synth_afdi(M, np.eye(2, dtype=int))
    for j in range(2):
        sc = Scenario(20.0, 0.01, faults=(FaultEvent(j, 2.0, "sinusoid", 1.0, 0.5),))
        tr = simulate(M, res.filter, sc, tau=[1e-6, 1e-6])
        assert tr.iota[-1].tolist() == np.eye(2, dtype=int)[:, j].tolist()


def test_csv_output(tmp_path):
    r = synth_efd(AFD_MODEL)
    tr = simulate(AFD_MODEL, r.filter, Scenario(0.05, 0.01, faults=(FaultEvent(0, 0.02),)))
    path = tmp_path / "trace.csv"
    tr.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "r_1", "theta_1", "iota_1"]
    assert len(rows) == 7
    assert rows[-1][-1] == "1"
