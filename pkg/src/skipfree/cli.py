"""Command-line entry point: ``skipfree <command> --model <path|preset> ...``.

Exit status: 0 on success, 2 for invalid models or queries, 3 for numerical
failures, 4 when a required hypothesis could not be established, 1 when
``verify`` finds a failing check.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import checks, exitlaws, potential, qsd, simulate
from .config import load_config, model_from_config, model_to_config, window_from_config
from .errors import HypothesisError, InvalidQuery, ModelError, NumericalError, SkipFreeError
from .model import hypothesis_report, killing_regime, validate_model
from .presets import PRESETS, preset

COMMANDS = ("validate", "potential", "exit", "decay", "qsd", "classify", "doob", "simulate", "verify")
EXIT_CODES = {ModelError: 2, NumericalError: 3, HypothesisError: 4}


def error_status(exc: SkipFreeError) -> int:
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return 1


# ---------------------------------------------------------------------------
# serialization


def jsonable(x):
    """Plain JSON types; non-finite floats become ``None``."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if x is None or isinstance(x, str):
        return x
    if hasattr(x, "to_dict"):
        return jsonable(x.to_dict())
    return str(x)


def dumps(obj) -> str:
    # float repr is the shortest string that round-trips (at most 17 digits)
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}{k}.")
    elif isinstance(obj, list) and obj and not isinstance(obj[0], (dict, list)):
        for i, v in enumerate(obj):
            yield f"{prefix}{i}", v
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix.rstrip("."), obj


def to_csv(result: dict) -> str:
    """Tabular results (a ``rows`` list of dicts) as a table; anything else as key,value pairs."""
    buf = io.StringIO()
    rows = result.get("rows") if isinstance(result, dict) else None
    if rows:
        rows = jsonable(rows)
        fields = list(rows[0])
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r[k] is None else repr(r[k]) if isinstance(r[k], float) else r[k]) for k in fields})
    else:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in _flatten(jsonable(result)):
            w.writerow([k, "" if v is None else repr(v) if isinstance(v, float) else v])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def _load(args):
    if args.model is None:
        raise InvalidQuery("--model is required for this command")
    if args.model in PRESETS and not Path(args.model).exists():
        m = preset(args.model)
        cfg = {}
    else:
        cfg = load_config(args.model)
        m = model_from_config(cfg)
    win = window_from_config(cfg, n_max=args.n_max, tol=args.tol)
    return validate_model(m, win), win


def _omega(args):
    return float(args.omega)


def cmd_validate(args):
    m, win = _load(args)
    return {"valid": True, "model": model_to_config(m, win), "hypotheses": hypothesis_report(m, win)}


def cmd_potential(args):
    m, win = _load(args)
    N = args.level or min(win.n_max, 20)
    t = potential.potential_table(m, _omega(args), N)
    rows = [{"i": i, "j": j, "W": float(t.w[i, j]), "Z": float(t.z[i, j])} for i in range(N) for j in range(i + 1, N + 1)]
    return {"omega": _omega(args), "level": N, "negative_entries": t.negative_entries, "rows": rows}


def cmd_exit(args):
    m, win = _load(args)
    q = exitlaws.ExitQuery(args.a, args.i, args.N, _omega(args), args.j, not args.no_killing)
    out = {"a": q.a, "i": q.i, "N": q.N, "omega": _omega(args), "with_killing": q.with_killing,
           "downcross": exitlaws.downcross_laplace(m, q), "upcross": exitlaws.upcross_laplace(m, q)}
    if q.j is not None:
        g = exitlaws.occupation_transform(m, q)
        out.update(j=q.j, occupation=g.value, occupation_error=g.tail_residual)
    return out


def cmd_decay(args):
    m, win = _load(args)
    which = args.which or ("X" if m.is_killed else "Y")
    est = qsd.decay_parameter(m, win, which)
    out = est.to_dict()
    out["rows"] = [{"level": L, "lambda": v} for L, v in zip(est.levels, est.estimates)]
    return out


def cmd_qsd(args):
    m, win = _load(args)
    if args.family:
        fam = qsd.qsd_family(m, win, n_grid=args.n_grid)
        members = []
        for r in fam:
            if isinstance(r, SkipFreeError):
                members.append({"error": r.code, "message": str(r)})
            else:
                members.append({"theta": r.theta, "residual": r.residual, "tail_mass": r.tail_mass, "mass_at_1": float(r.probs[0])})
        return {"family": members}
    theta = args.theta
    if theta is None:
        theta = qsd.decay_parameter(m, win, "X" if m.is_killed else "Y").lambda0
    res = qsd.qsd_candidate(m, theta, win)
    out = res.to_dict()
    out["rows"] = [{"state": i + 1, "prob": float(p)} for i, p in enumerate(res.probs)]
    return out


def cmd_classify(args):
    m, win = _load(args)
    return qsd.classify(m, win).to_dict()


def cmd_doob(args):
    m, win = _load(args)
    dm = qsd.doob_transform(m, win)
    N = args.level or min(win.n_max - 1, 20)
    rows = []
    for i in range(1, N + 1):
        row = {"state": i, "h": float(dm.h(i)), "down": float(dm.model.down(i)), "up_total": float(dm.model.up.total(i)),
               "row_residual": float(dm.row_residual[i - 1]) if i <= dm.row_residual.size else None}
        if args.q is not None and i < N:
            g_model = potential.g_coefficients(dm.model, float(args.q), N)[i, N]
            row.update(G_transformed=float(g_model), G_closed_form=qsd.doob_g_closed_form(m, float(args.q), i, N, win))
        rows.append(row)
    return {"max_row_residual": dm.max_residual, "h_beyond": dm.h.beyond, "level": N, "q": args.q, "rows": rows}


def _parse_grid(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidQuery(f"bad --t-grid {text!r}") from None


def cmd_simulate(args):
    m, win = _load(args)
    caps = simulate.Caps(args.t_max, args.level_max)
    seed = args.seed
    if args.t_grid:
        lam = qsd.decay_parameter(m, win, "X" if m.is_killed else "Y").lambda0
        nu = qsd.qsd_candidate(m, lam, win)
        mu0 = nu if args.from_qsd else args.x0
        curve = simulate.convergence_curve(m, mu0, _parse_grid(args.t_grid), args.n_paths, seed, nu, caps,
                                           workers=args.workers)
        out = curve.to_dict()
        out["rows"] = out.pop("points")
        out.update(theta=lam, seed=seed, n_paths=args.n_paths)
        return out
    est = simulate.estimate_hitting_prob(m, args.x0, args.n_paths, seed, caps, workers=args.workers)
    out = {"hitting_probability": est.to_dict(), "x0": args.x0}
    if m.is_killed and killing_regime(m, win).small_killing and args.x0 < win.n_max:
        out["harmonic_h"] = potential.harmonic_h(m, win)(args.x0)
    return out


def cmd_verify(args):
    res = checks.run_checks(seed=args.seed, n_models=args.n_models)
    return {"passed": all(r.passed for r in res), "rows": [r.to_dict() for r in res]}


HANDLERS = {
    "validate": cmd_validate, "potential": cmd_potential, "exit": cmd_exit, "decay": cmd_decay, "qsd": cmd_qsd,
    "classify": cmd_classify, "doob": cmd_doob, "simulate": cmd_simulate, "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help=f"config JSON path or preset ({', '.join(sorted(PRESETS))})")
    common.add_argument("--out", help="write the result here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, default=0, help="unsigned 64-bit seed")
    common.add_argument("--n-max", type=int, help="truncation level (overrides the config)")
    common.add_argument("--tol", type=float, help="series tolerance (overrides the config)")

    p = argparse.ArgumentParser(prog="skipfree", description="Potential theory and QSDs of single-death chains.")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    sub.add_parser("validate", parents=[common], help="check a model and report its hypotheses")

    s = sub.add_parser("potential", parents=[common], help="W and Z tables")
    s.add_argument("--omega", type=float, default=0.0)
    s.add_argument("--level", type=int)

    s = sub.add_parser("exit", parents=[common], help="two-sided exit functionals")
    s.add_argument("--a", type=int, default=0)
    s.add_argument("--i", type=int, required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--j", type=int)
    s.add_argument("--omega", type=float, default=0.0)
    s.add_argument("--no-killing", action="store_true")

    s = sub.add_parser("decay", parents=[common], help="decay parameter along the schedule")
    s.add_argument("--which", choices=("X", "Y"))

    s = sub.add_parser("qsd", parents=[common], help="QSD candidate (default theta = lambda_0)")
    s.add_argument("--theta", type=float)
    s.add_argument("--family", action="store_true", help="scan a geometric grid of theta below lambda_0")
    s.add_argument("--n-grid", type=int, default=8)

    sub.add_parser("classify", parents=[common], help="QSD regime with the evidence trail")

    s = sub.add_parser("doob", parents=[common], help="Doob transform by the harmonic function")
    s.add_argument("--level", type=int)
    s.add_argument("--q", type=float, help="also compare G coefficients at this q")

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimates")
    s.add_argument("--x0", type=int, default=1)
    s.add_argument("--from-qsd", action="store_true", help="start the convergence curve from the computed QSD")
    s.add_argument("--n-paths", type=int, default=10_000)
    s.add_argument("--t-max", type=float, default=math.inf)
    s.add_argument("--level-max", type=int, default=100_000)
    s.add_argument("--t-grid", help="comma-separated times: emit a convergence curve")
    s.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("verify", parents=[common], help="cross-check against the dense reference computations")
    s.add_argument("--n-models", type=int, default=10)
    return p


def _normalize_argv(argv):
    """Accept ``--cmd <name>`` as an alternative to the positional command."""
    argv = list(argv)
    if "--cmd" in argv:
        k = argv.index("--cmd")
        if k + 1 >= len(argv):
            raise SystemExit("--cmd needs a value")
        name = argv[k + 1]
        del argv[k: k + 2]
        argv.insert(0, name)
    return argv


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(_normalize_argv(sys.argv[1:] if argv is None else argv))
    if not 0 <= args.seed < 2**64:
        print("error [InvalidQuery]: seed must be an unsigned 64-bit integer", file=stderr)
        return 2
    try:
        result = HANDLERS[args.command](args)
    except SkipFreeError as exc:
        print(f"error [{exc.code}]: {exc}", file=stderr)
        return error_status(exc)
    text = to_csv(result) if args.format == "csv" else dumps(result)
    if args.out:
        Path(args.out).write_text(text)
    else:
        stdout.write(text)
    if args.command == "verify" and not result["passed"]:
        return 1
    return 0


def main() -> None:
    sys.exit(run())
