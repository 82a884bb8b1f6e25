"""Command line front end.

Exit codes: 0 success, 1 I/O or parse error, 2 a detectability or
isolability condition fails, 3 non-standard factorization problem, 4 a
``validate`` check fails.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .analysis import grid_norm, hinf_norm, normal_rank
from .errors import (
    FDIError,
    NonStandardProblem,
    ParseError,
    SynthesisFailure,
    UnstableFilter,
    ValidationError,
)
from .factorizations import FilterPair, minreal
from .io import (
    dumps,
    filter_to_dict,
    load_filter,
    load_model,
    load_scenario,
    load_structure,
    load_system,
)
from .lss import col_concat, static
from .runtime import calibrate_threshold, simulate
from .synthesis import (
    StructureMatrix,
    SynthesisOptions,
    bank_gap,
    decoupling_norm,
    fault_noise_gap,
    internal_form,
    is_completely_detectable,
    is_strongly_isolable,
    min_detectable_fault,
    structure_matrix_of,
    synth_afd,
    synth_afdi,
    synth_amm,
    synth_efd,
    synth_efdi,
    synth_emm,
)

EXIT_OK, EXIT_IO, EXIT_UNSOLVABLE, EXIT_NONSTANDARD, EXIT_CHECK = 0, 1, 2, 3, 4


def _err(msg):
    print("fdisynth: " + msg, file=sys.stderr)


def _finite(x):
    return float(x) if math.isfinite(x) else "inf"


def _report(args, results, checks=(), code=0):
    if getattr(args, "json", False):
        opts = {k: v for k, v in vars(args).items() if k not in ("func", "json") and v is not None}
        inputs = {k: opts.pop(k) for k in ("model", "filter", "scenario") if k in opts}
        rep = {"command": args.command, "inputs": inputs, "options": opts,
               "results": results, "checks": list(checks), "exit_code": code}
        sys.stdout.write(dumps(rep))


# ---------------------------------------------------------------------------
# analyze


def cmd_analyze(args):
    model = load_model(args.model)
    det = is_completely_detectable(model, seed=args.seed)
    strong = is_strongly_isolable(model, seed=args.seed)
    ranks = {
        "G_d": normal_rank(model.Gd, seed=args.seed) if model.m_d else 0,
        "G_f": normal_rank(model.Gf, seed=args.seed) if model.m_f else 0,
        "G_d_G_f": normal_rank(col_concat(model.Gd, model.Gf), seed=args.seed)
        if model.m_d + model.m_f else 0,
    }
    res = {"detectable": det.tolist(), "strongly_isolable": bool(strong), "normal_ranks": ranks,
           "dimensions": {"n": model.sys.n, "p": model.p, "m_u": model.m_u, "m_d": model.m_d,
                          "m_f": model.m_f, "m_w": model.m_w}}
    if not args.json:
        print("domain            : %s" % model.domain)
        print("n, p              : %d, %d" % (model.sys.n, model.p))
        print("m_u m_d m_f m_w   : %d %d %d %d" % (model.m_u, model.m_d, model.m_f, model.m_w))
        print("rank G_d          : %d" % ranks["G_d"])
        print("rank [G_d G_f]    : %d" % ranks["G_d_G_f"])
        print("detectable faults : %s" % " ".join(str(int(b)) for b in det))
        print("strongly isolable : %s" % ("yes" if strong else "no"))
    _report(args, res)
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth


def _options(args):
    return SynthesisOptions(beta=args.poles, q=args.q,
                            least_order=args.least_order, norm=args.norm, seed=args.seed,
                            soft=args.soft)


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".fdisynth-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_synth(args):
    model = load_model(args.model)
    opts = _options(args)
    kind = args.kind
    if kind in ("efdi", "afdi"):
        S = load_structure(args.smat) if args.smat else StructureMatrix(np.eye(model.m_f, dtype=int))
        res = (synth_efdi if kind == "efdi" else synth_afdi)(model, S, opts)
    elif kind in ("emm", "amm"):
        Mr = load_system(args.ref) if args.ref else static(np.eye(model.m_f), model.domain,
                                                           model.sys.Ts)
        res = (synth_emm if kind == "emm" else synth_amm)(model, Mr, opts)
    else:
        res = (synth_efd if kind == "efd" else synth_afd)(model, opts)
    obj = filter_to_dict(res, seed=args.seed)
    _atomic_write(args.output, dumps(obj))
    out = {"problem": res.problem, "order": res.filter.order, "eta": _finite(res.eta),
           "structure_matrix": res.achieved_structure.tolist(), "degraded": res.degraded,
           "output": args.output}
    if res.matching_error is not None:
        out["matching_error"] = float(res.matching_error)
    if not args.json:
        print("problem     : %s" % res.problem)
        print("order       : %d" % res.filter.order)
        print("eta         : %s" % ("inf" if not math.isfinite(res.eta) else "%.6g" % res.eta))
        print("structure   : %s" % res.achieved_structure.tolist())
        if res.matching_error is not None:
            print("match error : %.6g" % res.matching_error)
        if res.degraded:
            print("note        : degraded mode (noise normalization skipped)")
        print("written     : %s" % args.output)
    _report(args, out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate / gap


def _pair_from_filter(model, Q, meta):
    R = internal_form(model, Q)
    sys_ = minreal(col_concat(Q, R.Rf, R.Rw))
    return FilterPair(sys_, Q.m, model.m_f, model.m_w, tuple(meta.get("blocks", [Q.p])))


def _filter_gap(F, meta, norm="hinf"):
    if meta.get("problem") in ("EFDI", "AFDI") and meta.get("structure_matrix") is not None:
        return bank_gap(F, meta["structure_matrix"], norm)
    return fault_noise_gap(F, norm)


def cmd_validate(args):
    model = load_model(args.model)
    Q, meta = load_filter(args.filter)
    checks = []

    def check(name, ok, value, limit=None):
        checks.append({"name": name, "passed": bool(ok), "value": value, "limit": limit})

    q_stable = Q.n == 0 or bool(np.all(
        (np.abs(np.linalg.eigvals(Q.A)) < 1) if Q.is_discrete
        else (np.linalg.eigvals(Q.A).real < 0)))
    check("filter_stable", q_stable, q_stable)
    R = internal_form(model, Q)
    qnorm = hinf_norm(Q) if q_stable else grid_norm(Q)
    limit = args.tol * (1 + qnorm)
    ru = grid_norm(R.Ru) if model.m_u else 0.0
    rd = grid_norm(R.Rd) if model.m_d else 0.0
    probe = decoupling_norm(model, Q, seed=0)
    check("R_u_grid_norm", ru <= limit, ru, limit)
    check("R_d_grid_norm", rd <= limit, rd, limit)
    check("decoupling_probe_norm", probe <= limit, probe, limit)
    results = {"R_u": ru, "R_d": rd, "decoupling_probe": probe}
    if q_stable:
        F = _pair_from_filter(model, Q, meta)
        S = structure_matrix_of(F, tol=1e-7)
        results["structure_matrix"] = S.tolist()
        if meta.get("structure_matrix") is not None:
            check("structure_matrix", S == meta["structure_matrix"], S.tolist(),
                  meta["structure_matrix"])
        eta = _filter_gap(F, meta)
        results["eta"] = _finite(eta)
        if meta.get("eta") is not None:
            want = math.inf if meta["eta"] == "inf" else float(meta["eta"])
            ok = (math.isinf(want) and math.isinf(eta)) or (
                math.isfinite(want) and math.isfinite(eta)
                and abs(eta - want) <= 1e-6 * max(1.0, abs(want)))
            check("eta", ok, _finite(eta), _finite(want))
    passed = all(c["passed"] for c in checks)
    if not args.json:
        for c in checks:
            print("%-22s %s  value=%s%s" % (c["name"], "PASS" if c["passed"] else "FAIL",
                                            c["value"],
                                            "" if c["limit"] is None else "  limit=%s" % (c["limit"],)))
    for c in checks:
        if not c["passed"]:
            _err("check %s failed" % c["name"])
    code = EXIT_OK if passed else EXIT_CHECK
    _report(args, results, checks, code)
    return code


def cmd_gap(args):
    model = load_model(args.model)
    Q, meta = load_filter(args.filter)
    F = _pair_from_filter(model, Q, meta)
    eta = _filter_gap(F, meta, args.norm)
    per, _ = min_detectable_fault(F, args.deltaw, args.norm)
    glob = 0.0 if math.isinf(eta) else (args.deltaw / eta if eta > 0 else math.inf)
    res = {"eta": _finite(eta), "delta_w": args.deltaw, "delta_f_min": _finite(glob),
           "delta_f_min_per_fault": [_finite(v) for v in per]}
    if not args.json:
        print("eta          : %s" % res["eta"])
        print("delta_f_min  : %s" % res["delta_f_min"])
        print("per fault    : %s" % " ".join(str(v) for v in res["delta_f_min_per_fault"]))
    _report(args, res)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args):
    model = load_model(args.model)
    Q, meta = load_filter(args.filter)
    scenario = load_scenario(args.scenario)
    blocks = tuple(meta.get("blocks", [Q.p]))
    if args.tau is not None:
        tau = np.array(args.tau, dtype=float)
    else:
        tau = calibrate_threshold(model, Q, scenario, n_runs=args.runs, margin=args.margin,
                                  window=args.window, seed=scenario.seed + 1000,
                                  floor=args.floor, blocks=blocks)
    trace = simulate(model, Q, scenario, tau=tau, window=args.window, blocks=blocks)
    trace.to_csv(args.output)
    fired = trace.iota.any(axis=0).astype(int).tolist()
    res = {"samples": len(trace.t), "tau": tau.tolist(), "fired": fired,
           "max_abs_r": float(np.max(np.abs(trace.r))) if trace.r.size else 0.0,
           "output": args.output}
    if not args.json:
        print("samples  : %d" % len(trace.t))
        print("tau      : %s" % " ".join("%.6g" % v for v in tau))
        print("fired    : %s" % " ".join(map(str, fired)))
        print("written  : %s" % args.output)
    _report(args, res)
    return EXIT_OK


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # usage errors share the I/O exit code; 2 is reserved for unsolvable problems
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, "%s: error: %s\n" % (self.prog, message))


def build_parser():
    ap = _Parser(prog="fdisynth",
                                 description="Fault detection and isolation filter synthesis.")
    ap.add_argument("--version", action="version", version="fdisynth " + __version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--json", action="store_true", help="print a JSON report on stdout")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("analyze", help="rank-based detectability and isolability tests")
    p.add_argument("model")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="synthesize a filter and write it as JSON")
    p.add_argument("kind", choices=["efd", "afd", "efdi", "afdi", "emm", "amm"])
    p.add_argument("model")
    p.add_argument("--smat", help="structure matrix file (isolation problems)")
    p.add_argument("--ref", help="reference model file (model matching problems)")
    p.add_argument("--poles", type=float, default=0.05, metavar="BETA",
                   help="stability margin of the filter poles (default 0.05)")
    p.add_argument("--least-order", action="store_true")
    p.add_argument("--q", type=int, help="residual outputs for the least-order search")
    p.add_argument("--soft", action="store_true", help="soft approximate isolation")
    p.add_argument("--norm", choices=["hinf", "h2"], default="hinf")
    p.add_argument("-o", "--output", required=True)
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="recheck a filter against a model")
    p.add_argument("model")
    p.add_argument("filter")
    p.add_argument("--tol", type=float, default=1e-7)
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="simulate the residual generator")
    p.add_argument("model")
    p.add_argument("filter")
    p.add_argument("scenario")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--tau", type=float, nargs="+", help="thresholds (skip calibration)")
    p.add_argument("--runs", type=int, default=20, help="calibration runs")
    p.add_argument("--margin", type=float, default=0.2)
    p.add_argument("--floor", type=float, default=1e-8, help="lower bound on thresholds")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gap", help="fault-to-noise gap and minimum detectable fault")
    p.add_argument("model")
    p.add_argument("filter")
    p.add_argument("--deltaw", type=float, default=1.0)
    p.add_argument("--norm", choices=["hinf", "h2"], default="hinf")
    common(p)
    p.set_defaults(func=cmd_gap)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except SynthesisFailure as exc:
        _err("%s [condition: %s; indices: %s]" % (exc, exc.condition, list(exc.indices)))
        _report(args, {"error": str(exc), "condition": exc.condition,
                       "indices": [list(i) if isinstance(i, tuple) else i for i in exc.indices]},
                code=EXIT_UNSOLVABLE)
        return EXIT_UNSOLVABLE
    except NonStandardProblem as exc:
        _err("non-standard problem: %s" % exc)
        _report(args, {"error": str(exc),
                       "zeros": [[float(z.real), float(z.imag)] for z in exc.zeros]},
                code=EXIT_NONSTANDARD)
        return EXIT_NONSTANDARD
    except (ParseError, ValidationError) as exc:
        field = getattr(exc, "field", None)
        _err("%s%s" % (exc, "" if not field else " (field: %s)" % field))
        _report(args, {"error": str(exc), "field": field}, code=EXIT_IO)
        return EXIT_IO
    except UnstableFilter as exc:
        _err(str(exc))
        _report(args, {"error": str(exc)}, code=EXIT_IO)
        return EXIT_IO
    except OSError as exc:
        _err("I/O error: %s" % exc)
        _report(args, {"error": str(exc)}, code=EXIT_IO)
        return EXIT_IO
    except FDIError as exc:
        _err("%s: %s" % (type(exc).__name__, exc))
        _report(args, {"error": str(exc), "type": type(exc).__name__}, code=EXIT_IO)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
