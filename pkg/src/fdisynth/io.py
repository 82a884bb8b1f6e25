"""JSON model, filter, structure and scenario files.

Writers produce canonical JSON: sorted keys, two-space indentation and
floats printed with 17 significant digits, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import __version__
from .errors import FDIError, ParseError, ValidationError
from .factorizations import minreal
from .lss import DescriptorRealization, make_model
from .runtime import FaultEvent, Scenario, Signal
from .synthesis import StructureMatrix, SynthesisModel, SynthesisResult

__all__ = [
    "dumps",
    "read_json",
    "write_json",
    "parse_model",
    "load_model",
    "save_model",
    "model_to_dict",
    "parse_system",
    "load_system",
    "filter_to_dict",
    "save_filter",
    "load_filter",
    "load_structure",
    "parse_scenario",
    "load_scenario",
]

PROBLEMS = ("EFD", "AFD", "EFDI", "AFDI", "EMM", "AMM")


# ---------------------------------------------------------------------------
# canonical JSON


def _fmt(x):
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            raise ValueError("non-finite number cannot be written as JSON")
        if x == 0:
            return "0.0"
        s = "%.17g" % x
        return s if any(c in s for c in ".en") else s + ".0"
    return json.dumps(x)


def _dump(obj, level):
    pad = "  " * (level + 1)
    end = "  " * level
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ["%s%s: %s" % (pad, json.dumps(str(k)), _dump(obj[k], level + 1))
                 for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in obj):
            return "[" + ", ".join(_fmt(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _dump(v, level + 1) for v in obj) + "\n" + end + "]"
    return _fmt(obj)


def dumps(obj) -> str:
    return _dump(obj, 0) + "\n"


def write_json(path, obj):
    text = dumps(obj)
    with open(path, "w") as fh:
        fh.write(text)


def read_json(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError("cannot read %s: %s" % (path, exc.strerror)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("%s: line %d column %d: %s" % (path, exc.lineno, exc.colno, exc.msg)) \
            from None


# ---------------------------------------------------------------------------
# matrices


def _matrix(obj, name, rows=None, cols=None):
    if obj is None:
        raise ValidationError("missing matrix %r" % name, field=name)
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        obj = [[obj]]
    if not isinstance(obj, list) or any(not isinstance(r, list) for r in obj):
        raise ValidationError("%s must be an array of arrays" % name, field=name)
    if len(obj) == 0 or all(len(r) == 0 for r in obj):
        return np.zeros((rows if rows is not None else len(obj), cols if cols is not None else 0))
    widths = {len(r) for r in obj}
    if len(widths) != 1:
        raise ValidationError("%s is not rectangular" % name, field=name)
    try:
        M = np.array(obj, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError("%s has non-numeric entries" % name, field=name) from None
    if not np.all(np.isfinite(M)):
        raise ValidationError("%s has non-finite entries" % name, field=name)
    if rows is not None and M.shape[0] != rows:
        raise ValidationError("%s must have %d rows, got %d" % (name, rows, M.shape[0]), field=name)
    if cols is not None and M.shape[1] != cols:
        raise ValidationError("%s must have %d columns, got %d" % (name, cols, M.shape[1]),
                              field=name)
    return M


def parse_system(obj, where="model") -> DescriptorRealization:
    """Realization from a dict with ``domain``, ``Ts``, ``A``, ``E``, ``B``, ``C``, ``D``."""
    if not isinstance(obj, dict):
        raise ValidationError("%s must be a JSON object" % where)
    domain = obj.get("domain", "continuous")
    if domain not in ("continuous", "discrete"):
        raise ValidationError("domain must be 'continuous' or 'discrete'", field="domain")
    Ts = obj.get("Ts")
    if domain == "discrete":
        if not isinstance(Ts, (int, float)) or isinstance(Ts, bool) or not Ts > 0:
            raise ValidationError("discrete models need a positive sample period Ts", field="Ts")
    else:
        Ts = None
    D = _matrix(obj.get("D"), "D")
    p, m = D.shape
    A = _matrix(obj.get("A", []), "A")
    n = A.shape[0]
    if A.size and A.shape[1] != n:
        raise ValidationError("A must be square", field="A")
    if A.size == 0:
        n = 0
        A = np.zeros((0, 0))
    B = _matrix(obj.get("B", []), "B", n, m) if n else np.zeros((0, m))
    C = _matrix(obj.get("C", []), "C", p, n) if n else np.zeros((p, 0))
    E = obj.get("E")
    E = _matrix(E, "E", n, n) if (E is not None and n) else None
    try:
        return make_model(A, E, B, C, D, domain, Ts)
    except FDIError as exc:
        raise ValidationError(str(exc), field="E" if E is not None else "A") from None


def _index_list(obj, name, m):
    if not isinstance(obj, list) or any(isinstance(i, bool) or not isinstance(i, int) for i in obj):
        raise ValidationError("inputs.%s must be an array of integers" % name, field="inputs")
    if any(i < 0 or i >= m for i in obj):
        raise ValidationError("inputs.%s has an index outside 0..%d" % (name, m - 1),
                              field="inputs")
    return obj


def parse_model(obj) -> SynthesisModel:
    sys = parse_system(obj)
    inputs = obj.get("inputs")
    if not isinstance(inputs, dict):
        raise ValidationError("missing 'inputs' object", field="inputs")
    unknown = set(inputs) - {"controls", "disturbances", "faults", "noise"}
    if unknown:
        raise ValidationError("unknown input groups %s" % sorted(unknown), field="inputs")
    groups = {k: _index_list(inputs.get(k, []), k, sys.m)
              for k in ("controls", "disturbances", "faults", "noise")}
    flat = [i for g in groups.values() for i in g]
    if len(flat) != len(set(flat)):
        raise ValidationError("input index sets overlap", field="inputs")
    if sorted(flat) != list(range(sys.m)):
        raise ValidationError("input index sets do not cover all %d columns" % sys.m,
                              field="inputs")
    return SynthesisModel.from_columns(sys, groups["controls"], groups["disturbances"],
                                       groups["faults"], groups["noise"])


def load_model(path) -> SynthesisModel:
    return parse_model(read_json(path))


def load_system(path) -> DescriptorRealization:
    return parse_system(read_json(path), where=str(path))


def _system_dict(G: DescriptorRealization):
    out = {"domain": G.domain, "A": G.A, "B": G.B, "C": G.C, "D": G.D}
    if G.is_discrete:
        out["Ts"] = float(G.Ts)
    return out


def model_to_dict(model: SynthesisModel):
    out = _system_dict(model.sys)
    k = 0
    groups = {}
    for name, width in (("controls", model.m_u), ("disturbances", model.m_d),
                        ("faults", model.m_f), ("noise", model.m_w)):
        groups[name] = list(range(k, k + width))
        k += width
    out["inputs"] = groups
    return out


def save_model(path, model: SynthesisModel):
    write_json(path, model_to_dict(model))


# ---------------------------------------------------------------------------
# filters


def filter_to_dict(result: SynthesisResult, seed=0):
    F = result.filter
    Q = minreal(F.Q)
    out = _system_dict(Q)
    eta = result.eta
    meta = {
        "problem": result.problem,
        "structure_matrix": result.achieved_structure.tolist(),
        "eta": "inf" if not math.isfinite(eta) else float(eta),
        "tool_version": __version__,
        "seed": int(seed),
        "blocks": list(F.blocks),
        "m_f": F.m_f,
        "m_w": F.m_w,
    }
    out["meta"] = meta
    return out


def save_filter(path, result: SynthesisResult, seed=0):
    write_json(path, filter_to_dict(result, seed))


def load_filter(path):
    """Returns ``(Q, meta)``."""
    obj = read_json(path)
    Q = parse_system(obj, where=str(path))
    meta = obj.get("meta")
    if not isinstance(meta, dict) or meta.get("problem") not in PROBLEMS:
        raise ValidationError("filter file needs meta.problem in %s" % (PROBLEMS,), field="meta")
    blocks = meta.get("blocks", [Q.p])
    if not isinstance(blocks, list) or sum(blocks) != Q.p:
        raise ValidationError("meta.blocks does not match the filter outputs", field="meta")
    sm = meta.get("structure_matrix")
    if sm is not None:
        S = StructureMatrix(sm)
        if S.shape[0] != len(blocks):
            raise ValidationError("structure matrix rows do not match the filter blocks",
                                  field="structure_matrix")
    eta = meta.get("eta")
    if eta is not None and eta != "inf" and not isinstance(eta, (int, float)):
        raise ValidationError("meta.eta must be a number or \"inf\"", field="meta")
    return Q, meta


def load_structure(path) -> StructureMatrix:
    obj = read_json(path)
    if isinstance(obj, dict):
        obj = obj.get("structure_matrix", obj.get("S"))
    if not isinstance(obj, list):
        raise ValidationError("structure file must hold an array of arrays",
                              field="structure_matrix")
    return StructureMatrix(obj)


# ---------------------------------------------------------------------------
# scenarios


def _signal(obj, where):
    if not isinstance(obj, dict):
        raise ValidationError("%s entries must be objects" % where, field=where)
    _reject_unknown(obj, ("shape", "amplitude", "onset", "frequency"), where)
    try:
        return Signal(obj.get("shape", "zero"), float(obj.get("amplitude", 0.0)),
                      float(obj.get("onset", 0.0)), float(obj.get("frequency", 1.0)))
    except (TypeError, ValueError):
        raise ValidationError("bad numeric value in %s" % where, field=where) from None


def _reject_unknown(obj, allowed, field):
    extra = set(obj) - set(allowed)
    if extra:
        raise ValidationError("unknown keys %s" % sorted(extra), field=field)


def parse_scenario(obj) -> Scenario:
    if not isinstance(obj, dict):
        raise ValidationError("scenario must be a JSON object")
    _reject_unknown(obj, ("duration", "dt", "u", "d", "faults", "noise", "seed"), "scenario")
    for key in ("duration", "dt"):
        if not isinstance(obj.get(key), (int, float)):
            raise ValidationError("scenario needs a numeric %r" % key, field=key)
    faults = []
    for ev in obj.get("faults", []):
        if not isinstance(ev, dict) or not isinstance(ev.get("index"), int):
            raise ValidationError("each fault needs an integer 'index'", field="faults")
        _reject_unknown(ev, ("index", "onset", "shape", "amplitude", "frequency"), "faults")
        faults.append(FaultEvent(ev["index"], float(ev.get("onset", 0.0)),
                                 ev.get("shape", "step"), float(ev.get("amplitude", 1.0)),
                                 float(ev.get("frequency", 1.0))))
    noise = obj.get("noise", {})
    if not isinstance(noise, dict):
        raise ValidationError("noise must be an object", field="noise")
    _reject_unknown(noise, ("bound", "kind"), "noise")
    bound = noise.get("bound", 0.0)
    return Scenario(float(obj["duration"]), float(obj["dt"]),
                    tuple(_signal(s, "u") for s in obj.get("u", [])),
                    tuple(_signal(s, "d") for s in obj.get("d", [])),
                    tuple(faults), bound if isinstance(bound, list) else float(bound),
                    noise.get("kind", "uniform"), int(obj.get("seed", 0)))


def load_scenario(path) -> Scenario:
    return parse_scenario(read_json(path))
