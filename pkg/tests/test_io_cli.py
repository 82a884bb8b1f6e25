import json

import numpy as np
import pytest

from fdisynth import cli
from fdisynth.errors import ParseError, ValidationError
from fdisynth.io import (
    dumps,
    load_filter,
    load_model,
    model_to_dict,
    parse_model,
    parse_scenario,
    save_model,
)
from fdisynth.lss import evaluate

EFD_MODEL = {
    "domain": "continuous",
    "A": [[-1.0]],
    "B": [[1.0, 1.0, 0.0]],
    "C": [[1.0], [1.0]],
    "D": [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
    "inputs": {"controls": [0], "disturbances": [1], "faults": [2]},
}

SCENARIO = {
    "duration": 4.0,
    "dt": 0.01,
    "u": [{"shape": "sinusoid", "amplitude": 1.0, "frequency": 0.5}],
    "d": [{"shape": "step", "amplitude": 2.0, "onset": 1.0}],
    "faults": [{"index": 0, "onset": 2.0, "shape": "step", "amplitude": 1.0}],
    "seed": 3,
}


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def files(tmp_path):
    same = dict(EFD_MODEL, B=[[1.0, 1.0, 1.0]], D=[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    return {
        "model": write(tmp_path / "model.json", EFD_MODEL),
        "same": write(tmp_path / "same.json", same),
        "scenario": write(tmp_path / "scenario.json", SCENARIO),
        "dir": tmp_path,
    }


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


# -- files ---------------------------------------------------------------


def test_model_round_trip(tmp_path):
    M = parse_model(EFD_MODEL)
    assert (M.m_u, M.m_d, M.m_f, M.m_w) == (1, 1, 1, 0)
    save_model(tmp_path / "m.json", M)
    M2 = load_model(tmp_path / "m.json")
    assert np.allclose(evaluate(M2.sys, 0.7j), evaluate(M.sys, 0.7j))
    assert model_to_dict(M2)["inputs"] == {"controls": [0], "disturbances": [1],
                                           "faults": [2], "noise": []}


def test_overlapping_inputs_rejected():
    bad = dict(EFD_MODEL, inputs={"controls": [0], "disturbances": [0, 1], "faults": [2]})
    with pytest.raises(ValidationError) as exc:
        parse_model(bad)
    assert exc.value.field == "inputs"


def test_discrete_needs_sample_period():
    with pytest.raises(ValidationError) as exc:
        parse_model(dict(EFD_MODEL, domain="discrete"))
    assert exc.value.field == "Ts"


def test_bad_json_reports_position(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{"A": [[1.0]],\n  "B": }')
    with pytest.raises(ParseError, match="line 2"):
        load_model(p)


def test_canonical_json_is_stable():
    obj = {"b": [1.0, 0.1, -2.5e-20], "a": {"z": 1, "y": "inf"}}
    text = dumps(obj)
    assert text == dumps(json.loads(text))
    assert text.index('"a"') < text.index('"b"')
    assert "0.10000000000000001" in text


def test_scenario_parsing():
    sc = parse_scenario(SCENARIO)
    assert sc.faults[0].index == 0 and sc.u[0].shape == "sinusoid"
    with pytest.raises(ValidationError):
        parse_scenario({"duration": 1.0})
    with pytest.raises(ValidationError) as exc:
        parse_scenario(dict(SCENARIO, noise_bound=0.2))
    assert exc.value.field == "scenario"


# -- command line ----------------------------------------------------------


def test_analyze(capsys, files):
    code, out, _ = run(capsys, "analyze", files["model"])
    assert code == 0 and "detectable faults : 1" in out


def test_synth_validate_gap_simulate(capsys, files):
    flt = files["dir"] / "filter.json"
    code, _, _ = run(capsys, "synth", "efd", files["model"], "-o", flt)
    assert code == 0
    data = json.loads(flt.read_text())
    assert data["meta"]["eta"] == "inf" and data["meta"]["problem"] == "EFD"
    Q, meta = load_filter(flt)
    assert Q.shape == (1, 3)
    code, out, _ = run(capsys, "validate", files["model"], flt)
    assert code == 0 and "FAIL" not in out
    code, out, _ = run(capsys, "gap", files["model"], flt, "--deltaw", "0.5")
    assert code == 0 and "inf" in out
    trace = files["dir"] / "trace.csv"
    code, _, _ = run(capsys, "simulate", files["model"], flt, files["scenario"], "-o", trace)
    assert code == 0
    rows = trace.read_text().splitlines()
    assert rows[0] == "t,r_1,theta_1,iota_1" and rows[-1].endswith(",1")
    assert rows[150].endswith(",0")


def test_json_report_schema(capsys, files):
    flt = files["dir"] / "f.json"
    code, out, _ = run(capsys, "synth", "efd", files["model"], "-o", flt, "--json")
    rep = json.loads(out)
    assert set(rep) == {"command", "inputs", "options", "results", "checks", "exit_code"}
    assert rep["exit_code"] == 0 and rep["results"]["eta"] == "inf"


def test_undetectable_fault_exit_code(capsys, files):
    flt = files["dir"] / "none.json"
    code, _, err = run(capsys, "synth", "efd", files["same"], "-o", flt)
    assert code == 2
    assert "complete-fault-detectability" in err
    assert not flt.exists()


def test_corrupted_filter_fails_validation(capsys, files):
    flt = files["dir"] / "filter.json"
    run(capsys, "synth", "afd", files["model"], "-o", flt)
    data = json.loads(flt.read_text())
    data["D"][0][1] += 1.0  # B_Q of a static filter lives in its feedthrough
    bad = write(files["dir"] / "bad.json", data)
    code, out, _ = run(capsys, "validate", files["model"], bad, "--json")
    rep = json.loads(out)
    assert code == 4 and rep["results"]["R_d"] > 0.1


def test_corrupted_dynamic_filter(capsys, tmp_path):
    model = dict(EFD_MODEL, A=[[-1.0, 0.0], [0.0, -2.0]], B=[[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]],
                 C=[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
                 D=[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    mpath = write(tmp_path / "m.json", model)
    flt = tmp_path / "f.json"
    assert run(capsys, "synth", "efd", mpath, "-o", flt)[0] == 0
    data = json.loads(flt.read_text())
    assert len(data["A"]) == 1
    data["B"][0][0] += 1.0
    bad = write(tmp_path / "bad.json", data)
    assert run(capsys, "validate", mpath, bad)[0] == 4


def test_deterministic_artifacts(capsys, files):
    a, b = files["dir"] / "a.json", files["dir"] / "b.json"
    run(capsys, "synth", "afd", files["model"], "-o", a, "--seed", "5")
    run(capsys, "synth", "afd", files["model"], "-o", b, "--seed", "5")
    assert a.read_bytes() == b.read_bytes()


def test_parse_error_exit_code(capsys, files):
    broken = files["dir"] / "broken.json"
    broken.write_text("{")
    code, _, err = run(capsys, "analyze", broken)
    assert code == 1 and "line 1" in err


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["gap"])
    assert exc.value.code == 1


def test_isolation_and_matching_commands(capsys, tmp_path):
    model = {
        "domain": "continuous", "A": [[-1.0]], "B": [[1.0, 0.0, 0.0]],
        "C": [[1.0], [0.0]], "D": [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        "inputs": {"controls": [0], "faults": [1, 2]},
    }
    mpath = write(tmp_path / "m.json", model)
    smat = write(tmp_path / "s.json", {"structure_matrix": [[1, 0], [0, 1]]})
    flt = tmp_path / "fdi.json"
    assert run(capsys, "synth", "efdi", mpath, "--smat", smat, "-o", flt)[0] == 0
    assert json.loads(flt.read_text())["meta"]["structure_matrix"] == [[1, 0], [0, 1]]
    assert run(capsys, "validate", mpath, flt)[0] == 0
    mm = tmp_path / "mm.json"
    assert run(capsys, "synth", "emm", mpath, "-o", mm)[0] == 0
    assert run(capsys, "validate", mpath, mm)[0] == 0


def test_nonstandard_exit_code(capsys, tmp_path):
    # fault and noise both enter through s/(s+1), a zero at the origin
    model = {
        "domain": "continuous", "A": [[-1.0]], "B": [[1.0, 1.0]], "C": [[-1.0]],
        "D": [[1.0, 1.0]], "inputs": {"faults": [0], "noise": [1]},
    }
    mpath = write(tmp_path / "m.json", model)
    flt = tmp_path / "f.json"
    code, _, err = run(capsys, "synth", "amm", mpath, "-o", flt)
    assert code == 3 and "non-standard" in err
    assert not flt.exists()
