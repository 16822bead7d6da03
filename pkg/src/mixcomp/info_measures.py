"""Classical and quantum information quantities, in bits."""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, ShapeError, ValidationError
from .math_core import projector, von_neumann_entropy

ZERO_PROB = 1e-15
STOCHASTIC_TOL = 1e-12


def distribution(p, *, tol: float = STOCHASTIC_TOL) -> np.ndarray:
    """Validate a probability vector."""
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValidationError("probabilities must be finite and nonnegative")
    if abs(p.sum() - 1.0) > tol:
        raise ValidationError(f"probabilities sum to {p.sum()!r}, expected 1")
    return p


def channel(w, *, tol: float = STOCHASTIC_TOL) -> np.ndarray:
    """Validate a row-stochastic matrix ``W[a, b] = W(b|a)``."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.size == 0:
        raise ShapeError(f"channel must be a nonempty matrix, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValidationError("channel entries must be finite and nonnegative")
    sums = w.sum(axis=1)
    if np.max(np.abs(sums - 1.0)) > tol:
        raise ValidationError(f"channel rows sum to {sums.tolist()}, expected 1")
    return w


def _plogp(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    mask = p > ZERO_PROB
    out[mask] = p[mask] * np.log2(p[mask])
    return out


def entropy(p) -> float:
    """H(P) = -sum p log2 p."""
    return float(-_plogp(distribution(p)).sum()) + 0.0


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"binary entropy argument {x!r} outside [0, 1]")
    return entropy([x, 1.0 - x])


def output_distribution(p, w) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != p.shape[0]:
        raise ShapeError(f"prior of length {p.shape[0]} does not match channel {w.shape}")
    return p @ w


def conditional_entropy(w, p) -> float:
    """H(W|P) = -sum_a P(a) sum_b W(b|a) log2 W(b|a)."""
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != p.shape[0]:
        raise ShapeError(f"prior of length {p.shape[0]} does not match channel {w.shape}")
    return float(-(p @ _plogp(w).sum(axis=1))) + 0.0


def mutual_information(p, w) -> float:
    """I(P, W) = H(Q) - H(W|P)."""
    q = output_distribution(p, w)
    return max(0.0, entropy(q) - conditional_entropy(w, p))


def reverse_channel(p, w) -> tuple[np.ndarray, np.ndarray]:
    """Output distribution ``Q`` and backward channel ``U[b, a] = P(a) W(b|a) / Q(b)``."""
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    q = output_distribution(p, w)
    if np.any(q <= 0):
        raise ValidationError(
            f"output letters {np.flatnonzero(q <= 0).tolist()} have zero probability; "
            "restrict the output alphabet to the support of Q"
        )
    u = (p[:, None] * w / q[None, :]).T
    return q, u


def holevo_quantities(prior, rho_letters, rho) -> dict:
    """S(rho), the average letter entropy, and chi = S(rho) - average."""
    s_rho = von_neumann_entropy(rho)
    s_bar = float(sum(pa * von_neumann_entropy(r) for pa, r in zip(prior, rho_letters)))
    return {"S_rho": s_rho, "S_bar": s_bar, "chi": s_rho - s_bar}


def holevo_chi(ensemble) -> float:
    """Holevo quantity of an :class:`~mixcomp.ensemble.Ensemble`."""
    d = ensemble.derived()
    return holevo_quantities(ensemble.P, d.rho_letters, d.rho)["chi"]


def entropy_continuity_bound(theta: float, n_outcomes: int) -> float:
    """-theta log2(theta / N): bound on |H(p) - H(q)| when ||p - q||_1 <= theta <= 1/2."""
    if not 0.0 <= theta <= 0.5:
        raise DomainError(f"theta={theta!r} outside [0, 1/2]")
    if theta == 0.0:
        return 0.0
    return -theta * math.log2(theta / n_outcomes)


def rate_continuity_bound(x_size: int, y_size: int, delta: float, delta_prime: float) -> float:
    """Bound on |I(P,W) - I(P_x,V)| for typical x and conditionally typical V.

    The first term is the continuity bound of the output entropy over
    ``|X||Y|`` cells, the second covers the change of the conditioning
    distribution, the third the change of the channel rows.
    """
    s = delta + delta_prime
    total = 0.0
    if s > 0:
        total += -x_size * y_size * s * math.log2(s * x_size)
    total += delta * math.log2(y_size)
    if delta_prime > 0:
        total += -x_size * y_size * delta_prime * math.log2(delta_prime)
    return total


# --- quantities from exact integer counts ---------------------------------

def _count_entropy(counts) -> float:
    """Entropy of the distribution counts / sum(counts), evaluated as
    log2(n) - sum c log2 c / n so that integer inputs stay exact until the
    final division."""
    c = np.asarray(counts, dtype=float).reshape(-1)
    n = c.sum()
    if n <= 0:
        return 0.0
    c = c[c > 0]
    return float(math.log2(n) - np.sum(c * np.log2(c)) / n) + 0.0


def entropy_from_counts(counts) -> float:
    return max(0.0, _count_entropy(counts))


def conditional_entropy_from_counts(joint) -> float:
    """H(V|P_x) for a joint count matrix ``N[a, b]``."""
    joint = np.asarray(joint, dtype=float)
    n = joint.sum()
    if n <= 0:
        return 0.0
    rows = joint.sum(axis=1)
    return max(0.0, float(sum(r / n * _count_entropy(joint[a]) for a, r in enumerate(rows) if r > 0)))


def mutual_information_from_counts(joint) -> float:
    """I(P_x, V) = H(P_y) - H(V|P_x) for a joint count matrix."""
    joint = np.asarray(joint, dtype=float)
    return max(0.0, _count_entropy(joint.sum(axis=0)) - conditional_entropy_from_counts(joint))
