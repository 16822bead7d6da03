"""Command-line driver: ``mixcomp {info,simulate,cover,rd,validate}``.

Every command writes plain data (text, CSV or JSON lines); CSV output starts
with a ``# schema:`` line naming the layout version. Outputs are
deterministic functions of the arguments and the seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import classical as cs
from . import info_measures as im
from . import protocol as pr
from .ensemble import resolve_ensemble
from .errors import GuardError, MixcompError
from .math_core import DIM_CAP, von_neumann_entropy
from .rng import default_seed

SCHEMAS = {
    "info": "# schema: mixcomp-info/1",
    "simulate": "# schema: mixcomp-simulate/1",
    "rd": "# schema: mixcomp-rd/1",
    "cover": "# schema: mixcomp-cover/1",
}

SIMULATE_COLUMNS = [
    "n", "rate", "list_size", "effective_rate", "trials", "mean_fidelity_mc", "exact_fidelity",
    "fidelity_bound", "p_e_max", "freq_ERR_ATYPICAL_X", "freq_ERR_ATYPICAL_V", "freq_PAYLOAD",
    "freq_ERR_NOT_ON_LIST", "bits_per_letter", "accelerated_trials", "status",
]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def _emit_rows(schema: str, columns: list[str], rows: list[dict], fmt: str) -> str:
    buf = io.StringIO()
    if fmt == "csv":
        buf.write(schema + "\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(columns)
        for r in rows:
            wr.writerow([_fmt(r.get(c)) for c in columns])
    else:
        for r in rows:
            buf.write(json.dumps({c: r.get(c) for c in columns}, sort_keys=False) + "\n")
    return buf.getvalue()


def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- info ---------------------------------------------------------------------

def info_measures(e) -> dict:
    d = e.derived()
    hq = im.entropy(d.Q)
    h_wp = im.conditional_entropy(e.W, e.P)
    mi = im.mutual_information(e.P, e.W)
    hol = im.holevo_quantities(e.P, d.rho_letters, d.rho)
    return {
        "H(Q)": hq,
        "H(W/P)": h_wp,
        "I(P,W)": mi,
        "S(rho)": von_neumann_entropy(d.rho),
        "S_bar": hol["S_bar"],
        "chi": hol["chi"],
        "I-chi": mi - hol["chi"],
    }


def cmd_info(args) -> int:
    e = resolve_ensemble(args.ensemble)
    vals = info_measures(e)
    if args.format == "text":
        width = max(map(len, vals))
        text = "".join(f"{k.ljust(width)}  {v:.12f}\n" for k, v in vals.items())
    else:
        rows = [{"measure": k, "value": v} for k, v in vals.items()]
        text = _emit_rows(SCHEMAS["info"], ["measure", "value"], rows, args.format)
    _write(text, args.out)
    return 0


# --- simulate -----------------------------------------------------------------

def _exact_feasible(e, cfg) -> bool:
    if e.is_orthogonal() and cfg.error_state in ("uniform_Y_mixture", "maximally_mixed"):
        return True
    return e.dim**cfg.n <= DIM_CAP


def simulate_cell(e, cfg: pr.ProtocolConfig, trials: int, seed: int) -> dict:
    row = {"n": cfg.n, "rate": cfg.rate, "list_size": cfg.list_size, "effective_rate": cfg.effective_rate,
           "trials": trials}
    try:
        stats = pr.run_trials(e, cfg, trials, seed, with_fidelity=True)
        d = stats.as_dict()
        row.update({k: d[k] for k in d if k.startswith("freq_")})
        row["mean_fidelity_mc"] = stats.mean_fidelity
        row["bits_per_letter"] = stats.mean_bits_per_letter
        row["accelerated_trials"] = stats.accelerated_trials
        if _exact_feasible(e, cfg):
            rep = pr.expected_fidelity_exact(e, cfg)
            row.update(exact_fidelity=rep.fidelity, fidelity_bound=rep.bound, p_e_max=rep.p_e_max)
        row["status"] = "ok"
    except GuardError as exc:
        row["status"] = f"guard: {exc} (bound={exc.bound})"
    except MixcompError as exc:
        row["status"] = f"error: {exc}"
    return row


def cmd_simulate(args) -> int:
    e = resolve_ensemble(args.ensemble)
    seed = args.seed
    rows = []
    for n in _ints(args.n):
        if args.list_size:
            cfgs = [dict(list_size=k) for k in _ints(args.list_size)]
        else:
            cfgs = [dict(rate=r) for r in _floats(args.rate)]
        for kw in cfgs:
            try:
                cfg = pr.ProtocolConfig(n=n, delta=args.delta, delta_prime=args.delta_prime, **kw)
            except MixcompError as exc:
                rows.append({"n": n, **kw, "status": f"error: {exc}"})
                continue
            rows.append(simulate_cell(e, cfg, args.trials, seed))
    _write(_emit_rows(SCHEMAS["simulate"], SIMULATE_COLUMNS, rows, args.format), args.out)
    return 0


# --- cover ----------------------------------------------------------------------

def cover_report(e, n: int, delta_x: float, delta_y: float, delta_xy: float) -> tuple[cs.CoverCode, dict]:
    code = cs.build_cover_greedy(e.P, e.W, n, delta_x, delta_y, delta_xy)
    verified = cs.verify_cover(code, e.P, e.W)
    eps = cs.CoverEpsilons.measured(code, e.P, e.W)
    lower, upper = cs.cover_rate_bounds(e.P, e.W, n, eps)
    jsl_lo, jsl_hi = cs.jsl_bound(code.n_rows, code.n_cols, code.v_min, code.a_max)
    report = {
        "n": n, "size": code.size, "rate": code.rate, "verified": verified,
        "rate_lower": lower, "rate_upper": upper, "mutual_information": im.mutual_information(e.P, e.W),
        "N": code.n_rows, "M": code.n_cols, "v": code.v_min, "a": code.a_max,
        "jsl_lower": jsl_lo, "jsl_upper": jsl_hi,
    }
    return code, report


def cmd_cover(args) -> int:
    e = resolve_ensemble(args.ensemble)
    n = _ints(args.n)[0]
    delta_x = args.delta if args.delta is not None else 0.2
    delta_y = args.delta_y if args.delta_y is not None else delta_x
    delta_xy = args.delta_prime if args.delta_prime is not None else 0.3
    code, report = cover_report(e, n, delta_x, delta_y, delta_xy)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(code.to_json() + "\n")
    if args.format == "text":
        sys.stdout.write("".join(f"{k:<18} {_fmt(v)}\n" for k, v in report.items()))
    else:
        sys.stdout.write(_emit_rows(SCHEMAS["cover"], list(report), [report], args.format))
    return 0 if report["verified"] else 1


# --- rd ------------------------------------------------------------------------

def cmd_rd(args) -> int:
    e = resolve_ensemble(args.ensemble)
    spec = cs.bhattacharyya_distortion(e.W)
    grid = np.linspace(0.0, spec.d0, args.points)
    curve = cs.rate_distortion_fn(e.P, spec, grid)
    if args.format == "jsonl":
        text = "".join(
            json.dumps({"D": float(d), "R": float(r), "iterations": int(i), "gap": float(g)}) + "\n"
            for d, r, i, g in zip(curve.D, curve.R, curve.iterations, curve.gap)
        )
    else:
        text = curve.to_csv(SCHEMAS["rd"])
    _write(text, args.out)
    return 0


# --- validate ----------------------------------------------------------------------

def cmd_validate(args) -> int:
    from .validation import format_matrix, run_all

    results = run_all(args.seed)
    sys.stdout.write(format_matrix(results) + "\n")
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixcomp", description="Visible compression of mixed-state sources.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt_default="csv", formats=("csv", "jsonl")):
        p.add_argument("--ensemble", default="trine", help="trine, two-coins:w=<float>, or a config file path")
        p.add_argument("--seed", type=int, default=None, help="master seed (default: $MIXCOMP_SEED or 0)")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--format", choices=formats, default=fmt_default)

    p = sub.add_parser("info", help="entropic measures of an ensemble")
    common(p, "text", ("text", "csv", "jsonl"))
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("simulate", help="protocol sweep over block lengths and rates")
    common(p)
    p.add_argument("--n", default="4", help="comma-separated block lengths")
    p.add_argument("--rate", default="1.0", help="comma-separated rates in bits per letter")
    p.add_argument("--list-size", default=None, help="comma-separated list sizes (overrides --rate)")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--delta-prime", type=float, default=None)
    p.add_argument("--trials", type=int, default=200)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cover", help="greedy type-covering code")
    common(p, "text", ("text", "csv", "jsonl"))
    p.add_argument("--n", default="8")
    p.add_argument("--delta", type=float, default=None, help="input typicality constant (default 0.2)")
    p.add_argument("--delta-y", type=float, default=None, help="output typicality constant (default: --delta)")
    p.add_argument("--delta-prime", type=float, default=None, help="joint typicality constant (default 0.3)")
    p.set_defaults(func=cmd_cover)

    p = sub.add_parser("rd", help="Bhattacharyya rate-distortion curve")
    common(p)
    p.add_argument("--points", type=int, default=21)
    p.set_defaults(func=cmd_rd)

    p = sub.add_parser("validate", help="run the invariant suites with fixed seeds")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is None:
        args.seed = default_seed(0)
    try:
        return args.func(args)
    except GuardError as exc:
        print(f"mixcomp: guard exceeded: {exc} (bound={exc.bound})", file=sys.stderr)
        return 2
    except MixcompError as exc:
        print(f"mixcomp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"mixcomp: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
