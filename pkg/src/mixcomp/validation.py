"""Fixed-seed invariant checks, one small suite per module.

Used by ``mixcomp validate``; the pytest suite covers the same ground in
more depth. Each check returns ``None`` on success or a short failure note.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import classical as cs
from . import info_measures as im
from . import math_core as mc
from . import protocol as pr
from . import types_engine as te
from .ensemble import builtin_trine, builtin_two_coins
from .rng import SharedRandomness

TOL = 1e-9


@dataclass(frozen=True)
class CheckResult:
    module: str
    name: str
    passed: bool
    detail: str = ""


_REGISTRY: list[tuple[str, str, Callable]] = []


def check(module: str):
    def deco(fn):
        _REGISTRY.append((module, fn.__name__.removeprefix("check_"), fn))
        return fn

    return deco


@check("math_core")
def check_fidelity_trace_distance(seed):
    rng = np.random.default_rng(seed)
    for _ in range(200):
        d = int(rng.integers(2, 6))
        s, w = mc.random_density_matrix(d, rng), mc.random_density_matrix(d, rng)
        f, t = mc.fidelity(s, w), mc.trace_distance(s, w)
        if not (1 - math.sqrt(f) - TOL <= t <= math.sqrt(max(0.0, 1 - f)) + TOL):
            return f"F={f:.6g} D={t:.6g} violates the fidelity/trace-distance inequalities"
        if abs(f - mc.fidelity(w, s)) > TOL:
            return "fidelity not symmetric"


@check("math_core")
def check_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    for _ in range(200):
        a, b, c = (mc.random_density_matrix(3, rng) for _ in range(3))
        if mc.trace_distance(a, c) > mc.trace_distance(a, b) + mc.trace_distance(b, c) + TOL:
            return "trace distance triangle inequality failed"


@check("types_engine")
def check_type_class_sizes(seed):
    for n in range(1, 9):
        for k in (2, 3):
            total = sum(te.type_class_size(t) for t in te.enumerate_types(n, k))
            if total != k**n:
                return f"type class sizes sum to {total} != {k}^{n}"


@check("types_engine")
def check_shell_partition(seed):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        n = int(rng.integers(1, 8))
        x = rng.integers(0, 2, size=n)
        t = te.type_of(x, 2)
        total = sum(te.shell_size(s) for s in te.enumerate_shells(t, 3))
        if total != 3**n:
            return f"shells of x={x.tolist()} do not partition Y^n"


@check("info_measures")
def check_mutual_information_identity(seed):
    rng = np.random.default_rng(seed)
    for _ in range(100):
        p = rng.dirichlet(np.ones(3))
        w = rng.dirichlet(np.ones(4), size=3)
        q = p @ w
        mi = im.mutual_information(p, w)
        if mi < -TOL or abs(mi - (im.entropy(q) - im.conditional_entropy(w, p))) > TOL:
            return "I(P,W) != H(Q) - H(W|P)"


@check("info_measures")
def check_holevo_below_entropy(seed):
    e = builtin_trine()
    chi = im.holevo_chi(e)
    if not 0 <= chi <= mc.von_neumann_entropy(e.derived().rho) + TOL:
        return f"chi={chi} outside [0, S(rho)]"
    if chi > im.mutual_information(e.P, e.W) + TOL:
        return "chi exceeds I(P,W)"


@check("ensemble_model")
def check_average_state(seed):
    for e in (builtin_trine(), builtin_two_coins(0.25)):
        rho = e.derived().rho
        if abs(np.trace(rho).real - 1) > TOL or np.linalg.eigvalsh(rho).min() < -TOL:
            return f"average state of {e.name} is not a density matrix"


@check("protocol")
def check_encode_decode_roundtrip(seed):
    e = builtin_trine()
    cfg = pr.ProtocolConfig(n=4, rate=1.0, delta=0.5, delta_prime=0.5)
    shared = SharedRandomness(seed)
    for t in range(40):
        x = pr.sample_source(e, cfg.n, shared, t)
        enc = pr.encode_with_details(e, x, cfg, shared, t)
        msg = pr.Message.from_bytes(enc.message.to_bytes(), enc.message.bit_cost)
        out = pr.bob_decode(e, msg, cfg, shared, t, expected_y=enc.y)
        if enc.y is not None and not np.array_equal(out.y, enc.y):
            return f"trial {t}: decoder output differs from encoder's choice"


@check("protocol")
def check_fidelity_bound(seed):
    e = builtin_two_coins(0.25)
    cfg = pr.ProtocolConfig(n=6, rate=1.0)
    rep = pr.expected_fidelity_exact(e, cfg)
    if not rep.bound_holds:
        return f"F={rep.fidelity:.6g} below bound {rep.bound:.6g}"


@check("classical_suite")
def check_commuting_bridge(seed):
    e = builtin_two_coins(0.25)
    rng = np.random.default_rng(seed)
    for n in (3, 4):
        cfg = pr.ProtocolConfig(n=n, rate=0.6)
        x = rng.integers(0, 2, size=n)
        a = cs.commuting_fidelity_exact(e, x, cfg)
        b = pr.fidelity_for_x(e, x, cfg, method="matrix")
        if abs(a - b) > TOL:
            return f"n={n}: closed form {a!r} vs matrix {b!r}"


@check("classical_suite")
def check_cover_verifies(seed):
    e = builtin_two_coins(0.25)
    code = cs.build_cover_greedy(e.P, e.W, 8, 0.2, 0.2, 0.3)
    if not cs.verify_cover(code, e.P, e.W):
        return "greedy cover fails verification"
    lo, hi = cs.jsl_bound(code.n_rows, code.n_cols, code.v_min, code.a_max)
    if not lo - TOL <= code.size <= hi + TOL:
        return f"cover size {code.size} outside [{lo:.3g}, {hi:.3g}]"


@check("classical_suite")
def check_rd_shape(seed):
    e = builtin_two_coins(0.25)
    spec = cs.bhattacharyya_distortion(e.W)
    grid = np.linspace(0, spec.d0, 11)
    curve = cs.rate_distortion_fn(e.P, spec, grid)
    if np.any(np.diff(curve.R) > 1e-12):
        return "R(D) increases"
    mid = 0.5 * (curve.R[:-2] + curve.R[2:])
    if np.any(curve.R[1:-1] > mid + 1e-6):
        return "R(D) not convex"
    if abs(curve.R[0] - im.entropy(e.P)) > 1e-6:
        return "R(0) != H(P)"


@check("cli")
def check_simulate_deterministic(seed):
    from .cli import main
    import io
    from contextlib import redirect_stdout

    outs = []
    for _ in range(2):
        buf = io.StringIO()
        with redirect_stdout(buf):
            main(["simulate", "--ensemble", "two-coins:w=0.2", "--n", "4", "--rate", "0.5,1",
                  "--trials", "20", "--seed", str(seed)])
        outs.append(buf.getvalue())
    if outs[0] != outs[1]:
        return "simulate output differs between identical runs"


def run_all(seed: int = 0) -> list[CheckResult]:
    results = []
    for module, name, fn in _REGISTRY:
        try:
            note = fn(seed)
        except Exception as exc:  # a crash counts as a failure, with its message
            note = f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(module, name, note is None, note or ""))
    return results


def format_matrix(results: list[CheckResult]) -> str:
    width = max(len(r.module) + len(r.name) + 1 for r in results)
    lines = []
    for r in results:
        label = f"{r.module}.{r.name}".ljust(width)
        lines.append(f"{label}  {'PASS' if r.passed else 'FAIL'}{'  ' + r.detail if r.detail else ''}")
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} checks passed")
    return "\n".join(lines)
