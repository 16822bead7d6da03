"""Classical companions of the compression problem.

* the commuting case, where Bob's state is a probability distribution and
  the fidelity is a Bhattacharyya-Wooters overlap;
* type covering: a deterministic code of output sequences containing a
  W-generated representative for every typical input;
* Bhattacharyya distortion, its rate-distortion function, and a random
  coding experiment for the fidelity of lossy reproduction codes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import info_measures as im
from .ensemble import Ensemble, all_sequences
from .errors import (
    DomainError,
    GuardError,
    InfeasibleCoverError,
    ShapeError,
    SolverError,
    ValidationError,
)
from .protocol import ProtocolConfig, commuting_fidelity_from_table, shell_table
from .rng import Stream, uniform_array
from .types_engine import (
    TypeVector,
    is_conditionally_typical,
    joint_counts,
    log2_sequence_probability,
    log2_shell_size,
    shell_array,
    type_of,
)

_LN2 = math.log(2.0)
SEQUENCE_GUARD = 1 << 16


def bw_overlap(p, q) -> float:
    """Bhattacharyya-Wooters overlap (sum_i sqrt(p_i q_i))**2."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ShapeError(f"distributions have shapes {p.shape} and {q.shape}")
    return float(min(1.0, np.sum(np.sqrt(p * q)) ** 2))


def commuting_fidelity_exact(e: Ensemble, x, cfg: ProtocolConfig) -> float:
    """F(rho_x, Bob's state) for an orthonormal dictionary, grouped by V-shell.

    Both states are diagonal in the product basis, so the fidelity is the
    overlap of Alice's W^n(.|x) with Bob's output distribution. Sequences in
    one shell share both probabilities, and everything is summed in the log
    domain, which keeps block lengths in the hundreds tractable.
    """
    if not e.is_orthogonal():
        raise DomainError("commuting_fidelity_exact needs an orthonormal state dictionary")
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    if x.size != cfg.n:
        raise ValidationError(f"sequence length {x.size} differs from block length {cfg.n}")
    return commuting_fidelity_from_table(shell_table(e, type_of(x, e.x_size), cfg), e, cfg)


def joint_overlap(x, y, w) -> float:
    """Overlap of P_x W with the joint type of (x, y)."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if x.shape != y.shape:
        raise ShapeError(f"sequence lengths differ: {x.size} vs {y.size}")
    joint = joint_counts(x, y, *w.shape)
    rows = joint.sum(axis=1, keepdims=True)
    return float(min(1.0, (np.sum(np.sqrt(rows * w * joint)) / x.size) ** 2))


def conditional_typicality_from_overlap(x, y, w, overlap: float | None = None) -> float:
    """Certified constant: an overlap of 1 - alpha/2 makes y W-generated with 2 sqrt(alpha).

    Raises ``AssertionError`` if the certificate does not hold, which would
    contradict the fidelity/trace-distance inequalities.
    """
    if overlap is None:
        overlap = joint_overlap(x, y, w)
    alpha = 2.0 * (1.0 - overlap)
    if not -1e-12 <= alpha <= 2.0 + 1e-12:
        raise DomainError(f"overlap {overlap!r} outside [0, 1]")
    delta = 2.0 * math.sqrt(max(0.0, alpha))
    assert is_conditionally_typical(x, y, w, delta), "overlap certificate failed"
    return delta


# --- type covering ------------------------------------------------------------

@dataclass
class CoverCode:
    """Output sequences covering the typical inputs, with matrix statistics.

    ``n_rows``/``n_cols`` are the typical-set sizes (N, M); ``v_min`` and
    ``a_max`` the minimum row and maximum column weights of the 0-1 matrix.
    """

    n: int
    delta_x: float
    delta_y: float
    delta_xy: float
    members: list
    n_rows: int = 0
    n_cols: int = 0
    v_min: int = 0
    a_max: int = 0

    @property
    def delta(self) -> float:
        return self.delta_x + self.delta_xy

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def rate(self) -> float:
        return math.log2(self.size) / self.n if self.size else 0.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "delta_x": self.delta_x,
                "delta_y": self.delta_y,
                "delta_xy": self.delta_xy,
                "members": [list(map(int, m)) for m in self.members],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "CoverCode":
        d = json.loads(text)
        return cls(d["n"], d["delta_x"], d["delta_y"], d["delta_xy"], [tuple(m) for m in d["members"]])


def typical_sequences(p, n: int, delta: float) -> np.ndarray:
    """All P-typical sequences of length n (rows, lexicographic)."""
    p = np.asarray(p, dtype=float)
    if p.size**n > SEQUENCE_GUARD:
        raise GuardError(f"{p.size}^{n} sequences exceed the guard {SEQUENCE_GUARD}", bound=SEQUENCE_GUARD)
    seqs = all_sequences(p.size, n)
    counts = np.stack([(seqs == a).sum(axis=1) for a in range(p.size)], axis=1)
    ok = np.all(np.abs(counts / n - p) <= delta + 1e-12, axis=1)
    ok &= ~np.any((p == 0) & (counts > 0), axis=1)
    return seqs[ok]


def _pair_counts(xs: np.ndarray, ys: np.ndarray, x_size: int, y_size: int) -> np.ndarray:
    """N[i, j, a, b] for every pair (xs[i], ys[j])."""
    out = np.empty((xs.shape[0], ys.shape[0], x_size, y_size), dtype=np.int64)
    for a in range(x_size):
        xa = (xs == a).astype(np.int64)
        for b in range(y_size):
            out[:, :, a, b] = xa @ (ys == b).astype(np.int64).T
    return out


def cover_matrix(p, w, n: int, delta_x: float, delta_y: float, delta_xy: float):
    """Rows: P-typical x; columns: Q-typical y; 1 iff (x, y) jointly typical."""
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    q = p @ w
    xs = typical_sequences(p, n, delta_x)
    ys = typical_sequences(q, n, delta_y)
    counts = _pair_counts(xs, ys, *w.shape)
    target = p[:, None] * w
    ok = np.all(np.abs(counts / n - target) <= delta_xy + 1e-12, axis=(2, 3))
    ok &= ~np.any((w == 0) & (counts > 0), axis=(2, 3))
    return xs, ys, ok


def build_cover_greedy(p, w, n: int, delta_x: float, delta_y: float, delta_xy: float) -> CoverCode:
    """Greedy set cover of the typical inputs by jointly typical outputs.

    Each step takes the column covering the most uncovered rows; ties go to
    the lexicographically smallest column.
    """
    xs, ys, a_mat = cover_matrix(p, w, n, delta_x, delta_y, delta_xy)
    if xs.shape[0] == 0:
        raise InfeasibleCoverError("no typical input sequences for these constants")
    row_w = a_mat.sum(axis=1)
    if np.any(row_w == 0):
        bad = xs[np.flatnonzero(row_w == 0)[0]]
        raise InfeasibleCoverError(f"typical x={bad.tolist()} has no jointly typical column (delta_xy too small)")
    uncovered = np.ones(xs.shape[0], dtype=bool)
    chosen = []
    a_int = a_mat.astype(np.int64)
    while uncovered.any():
        gain = uncovered.astype(np.int64) @ a_int
        j = int(np.argmax(gain))
        chosen.append(j)
        uncovered &= ~a_mat[:, j]
    members = [tuple(int(v) for v in ys[j]) for j in chosen]
    return CoverCode(
        n, delta_x, delta_y, delta_xy, members,
        n_rows=int(xs.shape[0]), n_cols=int(ys.shape[0]),
        v_min=int(row_w.min()), a_max=int(a_mat.sum(axis=0).max()),
    )


def cover_assignment(code: CoverCode, p, w, x) -> tuple | None:
    """The member of ``code`` in T_{W,delta}(x) with the largest joint overlap, if any."""
    best, best_f = None, -1.0
    for y in code.members:
        if is_conditionally_typical(x, y, w, code.delta):
            f = joint_overlap(x, y, w)
            if f > best_f:
                best, best_f = y, f
    return best


def verify_cover(code: CoverCode, p, w) -> bool:
    """Every P-typical x (constant delta_x) has a code member W-generated by it."""
    for x in typical_sequences(p, code.n, code.delta_x):
        if cover_assignment(code, p, w, x) is None:
            return False
    return True


def cover_expected_overlap(code: CoverCode, p, w, y_error=None) -> float:
    """sum_x P(x) F(P_x W, P_{x, y(x)}) with y(x) from the code, or ``y_error`` for atypical x."""
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    if p.size**code.n > SEQUENCE_GUARD:
        raise GuardError(f"{p.size}^{code.n} sequences exceed the guard", bound=SEQUENCE_GUARD)
    y_error = np.zeros(code.n, dtype=np.int64) if y_error is None else np.asarray(y_error)
    total = []
    for x in all_sequences(p.size, code.n):
        px = 2.0 ** float(log2_sequence_probability(np.bincount(x, minlength=p.size), p))
        if px == 0:
            continue
        typical = np.all(np.abs(np.bincount(x, minlength=p.size) / code.n - p) <= code.delta_x + 1e-12)
        y = cover_assignment(code, p, w, x) if typical else None
        total.append(px * joint_overlap(x, y_error if y is None else y, w))
    return math.fsum(total)


def jsl_bound(n_rows: int, n_cols: int, v: float, a: float) -> tuple[float, float]:
    """Covering-size bounds for a 0-1 matrix: (N/a, (M/v)(1 + ln a)).

    Any column subset with no all-zero row has at least N/a columns; one of
    at most (M/v)(1 + ln a) exists. The logarithm here is natural.
    """
    if v < 1 or a < 1:
        raise DomainError("row weight v and column weight a must be >= 1")
    return n_rows / a, (n_cols / v) * (1.0 + math.log(a))


@dataclass(frozen=True)
class CoverEpsilons:
    """Deviation terms in the covering-rate sandwich, all in bits per letter.

    ``eps_x``: log2 N = n (H(P) + eps_x); ``eps_y``: log2 M = n (H(Q) + eps_y);
    ``eps_p``: log2 v = n (H(W|P) - eps_p); ``eps_pp``: log2 a = n (H(U|Q) + eps_pp).
    """

    eps_x: float = 0.0
    eps_y: float = 0.0
    eps_p: float = 0.0
    eps_pp: float = 0.0

    @classmethod
    def measured(cls, code: CoverCode, p, w) -> "CoverEpsilons":
        q, u = im.reverse_channel(p, w)
        n = code.n
        return cls(
            eps_x=math.log2(code.n_rows) / n - im.entropy(p),
            eps_y=math.log2(code.n_cols) / n - im.entropy(q),
            eps_p=im.conditional_entropy(w, p) - math.log2(code.v_min) / n,
            eps_pp=math.log2(code.a_max) / n - im.conditional_entropy(u, q),
        )


def cover_rate_bounds(p, w, n: int, eps: CoverEpsilons = CoverEpsilons()) -> tuple[float, float]:
    """Lower and upper bounds on the rate of a covering code, bits per letter."""
    q, u = im.reverse_channel(p, w)
    mi = im.mutual_information(p, w)
    h_uq = im.conditional_entropy(u, q)
    lower = mi + eps.eps_x - eps.eps_pp
    ln_a = n * (h_uq + eps.eps_pp) * _LN2
    upper = mi + eps.eps_y + eps.eps_p + math.log2(1.0 + ln_a) / n
    return lower, upper


# --- Bhattacharyya distortion and rate-distortion ----------------------------

@dataclass(frozen=True)
class DistortionSpec:
    matrix: np.ndarray

    @property
    def d0(self) -> float:
        return float(self.matrix.max())

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def bhattacharyya_distortion(w) -> DistortionSpec:
    """d_W(a, a') = -log2 sum_b sqrt(W(b|a) W(b|a'))."""
    w = im.channel(w)
    bc = np.sqrt(w) @ np.sqrt(w).T
    if np.any(bc <= 0):
        a, a2 = np.argwhere(bc <= 0)[0]
        raise DomainError(f"rows {a} and {a2} share no output letter; the distortion would be infinite")
    d = -np.log2(np.clip(bc, None, 1.0))
    np.fill_diagonal(d, 0.0)
    d = 0.5 * (d + d.T)
    d.setflags(write=False)
    return DistortionSpec(d)


def sequence_distortion(x, x_hat, spec: DistortionSpec) -> float:
    x = np.asarray(x, dtype=np.int64)
    x_hat = np.asarray(x_hat, dtype=np.int64)
    return float(spec.matrix[x, x_hat].mean())


def sequence_fidelity(x, x_hat, spec: DistortionSpec) -> float:
    """F(x, x') = 2**(-2 n d_W(x, x'))."""
    x = np.asarray(x, dtype=np.int64)
    return 2.0 ** (-2.0 * x.size * sequence_distortion(x, x_hat, spec))


@dataclass
class RDCurve:
    D: np.ndarray
    R: np.ndarray
    iterations: np.ndarray
    gap: np.ndarray

    def to_csv(self, schema_line: str | None = "# schema: mixcomp-rd/1") -> str:
        buf = io.StringIO()
        if schema_line:
            buf.write(schema_line + "\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["D", "R", "iterations", "gap"])
        for row in zip(self.D, self.R, self.iterations, self.gap):
            wr.writerow([f"{row[0]:.12g}", f"{row[1]:.12g}", int(row[2]), f"{row[3]:.3e}"])
        return buf.getvalue()


def blahut_arimoto(p, d, beta: float, q0=None, *, tol: float = 1e-7, max_iter: int = 100_000):
    """Alternating minimisation at slope ``beta`` (bits per unit distortion).

    Returns ``(rate, distortion, q, iterations, gap)`` where ``gap`` is the
    difference between Blahut's upper and lower bounds in bits.
    """
    p = np.asarray(p, dtype=float)
    d = np.asarray(d, dtype=float)
    a_mat = np.exp2(-beta * d)
    q = np.full(d.shape[1], 1.0 / d.shape[1]) if q0 is None else np.asarray(q0, dtype=float).copy()

    def step(q):
        c = (p / (a_mat @ q)) @ a_mat
        with np.errstate(divide="ignore"):
            logc = np.log2(c)
        support = q > 0
        gap = float(logc[support].max() - np.sum(q[support] * logc[support]))
        q = q * c
        return q / q.sum(), gap

    # plain updates, with a squared extrapolation (SQUAREM) every other step;
    # the extrapolated point is floored against the plain iterate to stay positive
    gap = math.inf
    it = 0
    while it < max_iter:
        q1, gap = step(q)
        it += 1
        if gap <= tol:
            q = q1
            break
        if it == max_iter:
            q = q1
            continue
        q2, gap = step(q1)
        it += 1
        if gap <= tol:
            q = q2
            break
        r = q1 - q
        v = q2 - q1 - r
        nv = np.linalg.norm(v)
        if nv > 0:
            alpha = min(-1.0, -np.linalg.norm(r) / nv)
            qx = np.maximum(q - 2 * alpha * r + alpha**2 * v, 1e-3 * q2)
            q = qx / qx.sum()
        else:
            q = q2
    else:
        raise SolverError(
            f"rate-distortion iteration did not converge in {max_iter} steps (gap {gap:.2e})",
            {"beta": beta, "gap": gap, "iterations": it},
        )
    z = a_mat @ q
    v = a_mat * q[None, :] / z[:, None]
    dist = float(np.sum(p[:, None] * v * d))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(v > 0, v * np.log2(v / q[None, :]), 0.0)
    rate = max(0.0, float(np.sum(p[:, None] * terms)))
    return rate, dist, q, it, gap


def rate_distortion_fn(p, spec: DistortionSpec, d_grid, *, tol: float = 1e-7, max_iter: int = 100_000) -> RDCurve:
    """R(D) = min I(P, V) over test channels with average distortion <= D.

    Each grid point is found by bisection on the slope, then corrected along
    the tangent. R(0) is H(P) exactly when all off-diagonal distortions are
    positive; R(D) = 0 from D_max = min_a' sum_a P(a) d(a, a') on.
    """
    p = im.distribution(p)
    d = np.asarray(spec.matrix, dtype=float)
    d_grid = np.asarray(d_grid, dtype=float)
    if np.any(d_grid < 0) or np.any(d_grid > spec.d0 + 1e-12):
        raise DomainError(f"distortion grid must lie in [0, {spec.d0}]")
    d_max = float((p @ d).min())
    offdiag_positive = bool(np.all(d[~np.eye(d.shape[0], dtype=bool)] > 0))
    h_p = im.entropy(p)
    rates, iters, gaps = [], [], []
    q = None
    for target in d_grid:
        if target <= 0 and offdiag_positive:
            rates.append(h_p), iters.append(0), gaps.append(0.0)
            continue
        if target >= d_max:
            rates.append(0.0), iters.append(0), gaps.append(0.0)
            continue
        lo, hi = math.log(1e-6), math.log(1e5)
        total_it = 0
        best = None
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            beta = math.exp(mid)
            rate, dist, q, it, gap = blahut_arimoto(p, d, beta, q, tol=tol, max_iter=max_iter)
            total_it += it
            if best is None or abs(dist - target) < abs(best[1] - target):
                best = (rate, dist, beta, gap)
            if abs(dist - target) <= 1e-11:
                break
            if dist > target:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-13:
                break
        rate, dist, beta, gap = best
        rates.append(max(0.0, rate + beta * (dist - target)))
        iters.append(total_it)
        gaps.append(gap)
    order = np.argsort(d_grid, kind="stable")
    r = np.asarray(rates)
    r_sorted = np.minimum.accumulate(r[order])
    r[order] = r_sorted
    return RDCurve(d_grid.copy(), r, np.asarray(iters), np.asarray(gaps))


# --- random coding --------------------------------------------------------------

@dataclass
class RandomCodeResult:
    mean_distortion: float
    mean_fidelity: float
    codebook_size: int
    mode: str
    distortions: np.ndarray = field(repr=False, default=None)
    fidelities: np.ndarray = field(repr=False, default=None)

    def __iter__(self):
        yield self.mean_distortion
        yield self.mean_fidelity


def _min_distortion_sampler(x_type: TypeVector, p, d):
    """Sorted distinct distortions of a random P^n codeword against x, with
    log survival function, by enumerating joint types."""
    joints = shell_array(x_type, p.size)
    n = x_type.n
    ln_prob = (np.asarray(log2_shell_size(joints)) + np.asarray(log2_sequence_probability(joints, p)).sum(axis=-1)) * _LN2
    dist = np.sum(joints * d[None, :, :], axis=(1, 2)) / n
    keep = np.isfinite(ln_prob)
    dist, ln_prob = dist[keep], ln_prob[keep]
    order = np.argsort(dist, kind="stable")
    dist, ln_prob = dist[order], ln_prob[order]
    # merge equal distortion values
    levels, ln_mass = [], []
    for dv, lp in zip(dist, ln_prob):
        if levels and abs(dv - levels[-1]) <= 1e-12:
            ln_mass[-1] = np.logaddexp(ln_mass[-1], lp)
        else:
            levels.append(dv)
            ln_mass.append(lp)
    ln_mass = np.asarray(ln_mass)
    # survival after level k: mass of strictly larger levels
    ln_surv = np.array([logsumexp(ln_mass[k + 1:]) if k + 1 < len(ln_mass) else -np.inf for k in range(len(ln_mass))])
    return np.asarray(levels), ln_surv


def random_code_experiment(
    p,
    spec: DistortionSpec,
    rate: float,
    n: int,
    trials: int,
    seed: int,
    *,
    materialize_limit: int = 1 << 22,
) -> RandomCodeResult:
    """Mean minimum distortion and fidelity of random reproduction codes.

    Each trial draws a fresh codebook of ``floor(2**(n*rate))`` i.i.d. P^n
    codewords and a source sequence x ~ P^n, and encodes x by the codeword of
    least distortion. When the codebook would exceed ``materialize_limit``
    letters, the minimum distortion is drawn from its exact law instead: the
    distortion of one random codeword depends only on its joint type with x,
    and the minimum of M i.i.d. copies has survival function S**M.
    """
    from .protocol import floor_pow2

    p = im.distribution(p)
    d = np.asarray(spec.matrix, dtype=float)
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    m = max(1, floor_pow2(n * rate))
    cdf = np.cumsum(p)
    mode = "materialized" if m * n <= materialize_limit else "order-statistic"
    samplers: dict = {}
    dists, fids = [], []
    for t in range(trials):
        u = uniform_array(seed, "rc-source", t, size=n)
        x = np.minimum(np.searchsorted(cdf, u, side="right"), p.size - 1)
        if mode == "materialized":
            uc = uniform_array(seed, "rc-codebook", t, size=m * n).reshape(m, n)
            book = np.minimum(np.searchsorted(cdf, uc, side="right"), p.size - 1)
            dmin = float(d[x[None, :], book].sum(axis=1).min()) / n
        else:
            key = tuple(np.bincount(x, minlength=p.size).tolist())
            if key not in samplers:
                samplers[key] = _min_distortion_sampler(TypeVector(key), p, d)
            levels, ln_surv = samplers[key]
            v = Stream(seed, "rc-min", t).uniform()
            ln_target = math.log1p(-v)
            # smallest level k with P(min <= level_k) >= v, i.e. M ln S_k <= ln(1 - v)
            k = int(np.argmax(float(m) * ln_surv <= ln_target))
            dmin = float(levels[k])
        dists.append(dmin)
        fids.append(2.0 ** (-2.0 * n * dmin))
    return RandomCodeResult(
        math.fsum(dists) / trials, math.fsum(fids) / trials, m, mode, np.asarray(dists), np.asarray(fids)
    )
