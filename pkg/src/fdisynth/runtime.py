"""Time-domain residual generation, evaluation and decision making.

The plant and the filter are simulated as one augmented system, discretized
exactly under a zero-order hold when the model is continuous.  Simulating
the interconnection (rather than plant and filter separately) keeps the
decoupled channels at round-off level.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, UnstableFilter, ValidationError
from .factorizations import FilterPair
from .lss import DescriptorRealization, series
from .synthesis import SynthesisModel, min_detectable_fault

__all__ = [
    "Signal",
    "FaultEvent",
    "Scenario",
    "ResidualTrace",
    "simulate",
    "evaluate_residual",
    "decide",
    "calibrate_threshold",
    "min_detectable_fault",
    "zoh",
]

SHAPES = ("zero", "constant", "step", "ramp", "sinusoid")
DEFAULT_WINDOW = 20


@dataclass(frozen=True)
class Signal:
    """Deterministic scalar signal: ``amplitude * shape(t - onset)`` for ``t >= onset``."""

    shape: str = "zero"
    amplitude: float = 0.0
    onset: float = 0.0
    frequency: float = 1.0  # Hz, sinusoid only

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValidationError("unknown signal shape %r" % (self.shape,), field="shape")
        if not np.isfinite(self.amplitude):
            raise ValidationError("amplitude must be finite", field="amplitude")

    def sample(self, t: np.ndarray) -> np.ndarray:
        tau = t - self.onset
        on = tau >= -1e-12
        if self.shape == "zero":
            return np.zeros_like(t)
        if self.shape == "constant":
            return np.full_like(t, self.amplitude)
        if self.shape == "step":
            return self.amplitude * on
        if self.shape == "ramp":
            return self.amplitude * np.where(on, tau, 0.0)
        return self.amplitude * np.where(on, np.sin(2 * np.pi * self.frequency * tau), 0.0)


@dataclass(frozen=True)
class FaultEvent:
    index: int
    onset: float
    shape: str = "step"
    amplitude: float = 1.0
    frequency: float = 1.0

    def __post_init__(self):
        if self.shape not in ("step", "ramp", "sinusoid"):
            raise ValidationError("fault shape must be step, ramp or sinusoid", field="shape")
        if not np.isfinite(self.amplitude):
            raise ValidationError("fault amplitude must be finite", field="amplitude")

    def signal(self):
        return Signal(self.shape, self.amplitude, self.onset, self.frequency)


@dataclass(frozen=True)
class Scenario:
    """Simulation recipe.

    ``u`` and ``d`` hold one :class:`Signal` per channel (missing channels are
    zero).  Noise is uniform on ``[-noise_bound, noise_bound]`` per channel
    and sample, held between samples.
    """

    duration: float
    dt: float
    u: tuple = ()
    d: tuple = ()
    faults: tuple = ()
    noise_bound: object = 0.0
    noise_kind: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt must be positive", field="dt")
        if not self.duration >= self.dt:
            raise ValidationError("duration must cover at least one step", field="duration")
        for ev in self.faults:
            if not 0 <= ev.onset <= self.duration:
                raise ValidationError("fault onset %g outside [0, duration]" % ev.onset,
                                      field="faults")
        if self.noise_kind not in ("uniform", "zero"):
            raise ValidationError("noise kind must be 'uniform' or 'zero'", field="noise")
        if np.any(np.asarray(self.noise_bound) < 0):
            raise ValidationError("noise bound must be non-negative", field="noise")

    @property
    def times(self) -> np.ndarray:
        n = int(round(self.duration / self.dt)) + 1
        return np.arange(n) * self.dt

    def fault_free(self) -> "Scenario":
        return replace(self, faults=())


@dataclass(eq=False)
class ResidualTrace:
    t: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    iota: np.ndarray
    tau: np.ndarray
    blocks: tuple = field(default=())

    def to_csv(self, path):
        """Write ``t,r_1..r_q,theta_1..,iota_1..`` with 15 significant digits."""
        q, nb = self.r.shape[1], self.theta.shape[1]
        header = (["t"] + ["r_%d" % (i + 1) for i in range(q)]
                  + ["theta_%d" % (i + 1) for i in range(nb)]
                  + ["iota_%d" % (i + 1) for i in range(nb)])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for k in range(len(self.t)):
                row = ["%.15g" % self.t[k]]
                row += ["%.15g" % v for v in self.r[k]]
                row += ["%.15g" % v for v in self.theta[k]]
                row += ["%d" % v for v in self.iota[k]]
                w.writerow(row)

    def redecide(self, tau=None) -> np.ndarray:
        return decide(self.theta, self.tau if tau is None else tau)


def zoh(G: DescriptorRealization, dt: float):
    """Exact zero-order-hold discretization ``(Ad, Bd, C, D)``."""
    n, m = G.n, G.m
    M = np.zeros((n + m, n + m))
    M[:n, :n] = G.A
    M[:n, n:] = G.B
    E = sla.expm(M * dt)
    return E[:n, :n], E[:n, n:], G.C, G.D


def _filter_sys(flt, blocks=None):
    if isinstance(flt, FilterPair):
        return flt.Q, tuple(blocks or flt.blocks)
    return flt, tuple(blocks or (flt.p,))


def _check_filter(Q):
    if Q.n == 0:
        return
    ev = np.linalg.eigvals(Q.A)
    bad = np.abs(ev) >= 1 if Q.is_discrete else ev.real >= 0
    if np.any(bad):
        raise UnstableFilter("refusing to simulate an unstable filter (poles %s)"
                             % np.array2string(ev[bad], precision=4))


def _inputs(model: SynthesisModel, sc: Scenario, t, rng):
    N = len(t)
    v = np.zeros((N, model.sys.m))
    for k, sig in enumerate(sc.u[:model.m_u]):
        v[:, k] = sig.sample(t)
    for k, sig in enumerate(sc.d[:model.m_d]):
        v[:, model.m_u + k] = sig.sample(t)
    off = model.m_u + model.m_d
    for ev in sc.faults:
        if not 0 <= ev.index < model.m_f:
            raise DimensionMismatch("fault index %d outside 0..%d" % (ev.index, model.m_f - 1))
        v[:, off + ev.index] += ev.signal().sample(t)
    if model.m_w and sc.noise_kind == "uniform":
        bound = np.broadcast_to(np.asarray(sc.noise_bound, dtype=float), (model.m_w,))
        v[:, off + model.m_f:] = rng.uniform(-1, 1, size=(N, model.m_w)) * bound
    return v


def _run(Ad, Bd, C, D, v):
    N = v.shape[0]
    x = np.zeros(Ad.shape[0])
    out = np.empty((N, C.shape[0]))
    Dv = v @ D.T
    for k in range(N):
        out[k] = C @ x + Dv[k]
        x = Ad @ x + Bd @ v[k]
    return out


def evaluate_residual(r: np.ndarray, window: int = DEFAULT_WINDOW, blocks=None) -> np.ndarray:
    """Trailing-window RMS of each residual block (shorter windows at the start)."""
    if window < 1:
        raise ValueError("window must be at least one sample")
    r = np.atleast_2d(np.asarray(r, dtype=float))
    if r.shape[0] == 1 and r.shape[1] > 1 and blocks is None:
        r = r.T
    blocks = tuple(blocks) if blocks else (r.shape[1],)
    N = r.shape[0]
    theta = np.zeros((N, len(blocks)))
    start = 0
    for i, b in enumerate(blocks):
        e = np.sum(r[:, start:start + b] ** 2, axis=1)
        c = np.concatenate([[0.0], np.cumsum(e)])
        k = np.arange(N)
        lo = np.maximum(0, k + 1 - window)
        cnt = k + 1 - lo
        theta[:, i] = np.sqrt(np.maximum(c[k + 1] - c[lo], 0.0) / cnt)
        start += b
    return theta


def decide(theta: np.ndarray, tau) -> np.ndarray:
    """``iota_i(t) = 1`` iff ``theta_i(t) > tau_i``."""
    return (np.asarray(theta) > np.asarray(tau, dtype=float)).astype(int)


def _interconnection(model, Q, dt):
    if Q.m != model.p + model.m_u:
        raise DimensionMismatch("filter has %d inputs, model needs p + m_u = %d"
                                % (Q.m, model.p + model.m_u))
    if Q.domain != model.sys.domain:
        raise DimensionMismatch("filter and model live in different time domains")
    J = series(Q, model.plant_map())
    if J.is_discrete:
        if not np.isclose(J.Ts, dt):
            raise DimensionMismatch("scenario dt %g differs from the sample period %g" % (dt, J.Ts))
        return J.A, J.B, J.C, J.D
    return zoh(J, dt)


def simulate(model: SynthesisModel, flt, scenario: Scenario, tau=None,
             window: int = DEFAULT_WINDOW, seed=None, blocks=None) -> ResidualTrace:
    """Drive the filter with the simulated plant outputs and inputs.

    ``tau`` defaults to zeros (every nonzero evaluation fires).  ``seed``
    overrides the scenario seed for the noise generator.
    """
    Q, blocks = _filter_sys(flt)
    _check_filter(Q)
    t = scenario.times
    rng = np.random.default_rng(scenario.seed if seed is None else seed)
    v = _inputs(model, scenario, t, rng)
    r = _run(*_interconnection(model, Q, scenario.dt), v)
    theta = evaluate_residual(r, window, blocks)
    tau = np.zeros(len(blocks)) if tau is None else np.broadcast_to(
        np.asarray(tau, dtype=float), (len(blocks),)).copy()
    return ResidualTrace(t, r, theta, decide(theta, tau), tau, tuple(blocks))


def calibrate_threshold(model: SynthesisModel, flt, scenario: Scenario, n_runs: int = 20,
                        margin: float = 0.2, window: int = DEFAULT_WINDOW, seed: int = 0,
                        floor: float = 0.0, blocks=None) -> np.ndarray:
    """``tau_i = (1 + margin) * max`` over fault-free runs of ``sup_t theta_i(t)``.

    Runs use the scenario's control, disturbance and noise settings with the
    faults removed, and noise seeds ``seed, seed+1, ...``.  ``floor`` is a
    lower bound on every threshold.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    Q, blocks = _filter_sys(flt, blocks)
    _check_filter(Q)
    sc = scenario.fault_free()
    t = sc.times
    Ad, Bd, C, D = _interconnection(model, Q, sc.dt)
    peak = np.zeros(len(blocks))
    for k in range(n_runs):
        v = _inputs(model, sc, t, np.random.default_rng(seed + k))
        theta = evaluate_residual(_run(Ad, Bd, C, D, v), window, blocks)
        peak = np.maximum(peak, theta.max(axis=0))
    return np.maximum((1 + margin) * peak, floor)
