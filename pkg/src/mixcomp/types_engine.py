"""Exact combinatorics of types, type classes and conditional-type shells.

Types and joint types are integer count vectors/matrices throughout. A
conditional type ``V`` given ``x`` is represented by the joint count matrix
``N[a, b] = #{i : x_i = a, y_i = b}``, which fixes ``V`` exactly without
fractional stochastic matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import GuardError, ShapeError, ValidationError

ENUM_GUARD = 10_000_000
_LN2 = math.log(2.0)
_TYP_TOL = 1e-12


@dataclass(frozen=True)
class TypeVector:
    """Occurrence counts ``N(a|x)`` of a sequence over an alphabet."""

    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if not counts or any(c < 0 for c in counts):
            raise ValidationError(f"invalid type counts {self.counts!r}")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def alphabet_size(self) -> int:
        return len(self.counts)

    def freqs(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.n

    def canonical_sequence(self) -> np.ndarray:
        return np.repeat(np.arange(self.alphabet_size), self.counts)


@dataclass(frozen=True)
class ShellDescriptor:
    """A V-shell: the x-type together with a consistent joint count matrix."""

    x_type: TypeVector
    joint: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        joint = tuple(tuple(int(v) for v in row) for row in self.joint)
        object.__setattr__(self, "joint", joint)
        if len(joint) != self.x_type.alphabet_size or len({len(r) for r in joint}) != 1:
            raise ShapeError("joint counts must have one row per x-letter and equal row lengths")
        for a, row in enumerate(joint):
            if any(v < 0 for v in row) or sum(row) != self.x_type.counts[a]:
                raise ValidationError(
                    f"joint row {a} = {row} is inconsistent with x-type count {self.x_type.counts[a]}"
                )

    @classmethod
    def from_sequences(cls, x, y, x_size: int, y_size: int) -> "ShellDescriptor":
        joint = joint_counts(x, y, x_size, y_size)
        return cls(type_of(x, x_size), tuple(map(tuple, joint.tolist())))

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.joint, dtype=np.int64)

    @property
    def y_size(self) -> int:
        return len(self.joint[0])


# --- sequences and counts ---------------------------------------------------

def _as_sequence(x, alphabet_size: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    if x.size and x.min() < 0:
        raise ValidationError("sequence symbols must be nonnegative")
    if alphabet_size is not None and x.size and x.max() >= alphabet_size:
        raise ValidationError(f"sequence symbol {x.max()} outside alphabet of size {alphabet_size}")
    return x


def type_of(x, alphabet_size: int) -> TypeVector:
    x = _as_sequence(x, alphabet_size)
    return TypeVector(tuple(np.bincount(x, minlength=alphabet_size).tolist()))


def joint_counts(x, y, x_size: int, y_size: int) -> np.ndarray:
    """``N[a, b]`` over positions of the pair ``(x, y)``."""
    x = _as_sequence(x, x_size)
    y = _as_sequence(y, y_size)
    if x.shape != y.shape:
        raise ShapeError(f"sequence lengths differ: {x.size} vs {y.size}")
    flat = np.bincount(x * y_size + y, minlength=x_size * y_size)
    return flat.reshape(x_size, y_size)


def shell_marginal_type(shell: ShellDescriptor) -> TypeVector:
    """Type shared by every y in the shell: the column sums of the joint counts."""
    return TypeVector(tuple(int(v) for v in shell.matrix.sum(axis=0)))


# --- sizes --------------------------------------------------------------------

def multinomial(counts: Sequence[int]) -> int:
    """n! / prod(c!) as an exact integer."""
    out, total = 1, 0
    for c in counts:
        total += c
        out *= math.comb(total, c)
    return out


def log2_multinomial(counts) -> float | np.ndarray:
    """log2 of the multinomial coefficient along the last axis (log-gamma)."""
    c = np.asarray(counts, dtype=float)
    val = (gammaln(c.sum(axis=-1) + 1.0) - gammaln(c + 1.0).sum(axis=-1)) / _LN2
    return float(val) if np.ndim(val) == 0 else val


def type_class_size(t: TypeVector) -> int:
    return multinomial(t.counts)


def log2_type_class_size(t: TypeVector) -> float:
    return log2_multinomial(t.counts)


def shell_size(shell: ShellDescriptor) -> int:
    """|T_V(x)| = prod_a multinomial(N(a, .))."""
    out = 1
    for row in shell.joint:
        out *= multinomial(row)
    return out


def log2_shell_size(shell) -> float | np.ndarray:
    """log2 |T_V(x)|; accepts a descriptor or a stack of joint count matrices."""
    joint = shell.matrix if isinstance(shell, ShellDescriptor) else np.asarray(shell)
    val = np.asarray(log2_multinomial(joint)).sum(axis=-1)
    return float(val) if np.ndim(val) == 0 else val


# --- enumeration --------------------------------------------------------------

def count_types(n: int, alphabet_size: int) -> int:
    return math.comb(n + alphabet_size - 1, alphabet_size - 1)


def _compositions(n: int, k: int) -> Iterator[tuple[int, ...]]:
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def compositions_array(n: int, k: int) -> np.ndarray:
    """All compositions of ``n`` into ``k`` ordered parts, lexicographic."""
    return np.array(list(_compositions(n, k)), dtype=np.int64).reshape(-1, k)


def enumerate_types(n: int, alphabet_size: int, *, guard: int = ENUM_GUARD) -> list[TypeVector]:
    """Every type of length-``n`` sequences, in lexicographic order of counts."""
    total = count_types(n, alphabet_size)
    if total > guard:
        raise GuardError(f"{total} types exceed the enumeration guard {guard}", bound=guard)
    return [TypeVector(c) for c in _compositions(n, alphabet_size)]


def type_index(t: TypeVector) -> int:
    """Rank of ``t`` in the order produced by :func:`enumerate_types`."""
    remaining = t.n
    k = t.alphabet_size
    idx = 0
    for i, c in enumerate(t.counts[:-1]):
        parts_left = k - i - 1
        for v in range(c):
            idx += count_types(remaining - v, parts_left)
        remaining -= c
    return idx


def type_from_index(index: int, n: int, alphabet_size: int) -> TypeVector:
    if not 0 <= index < count_types(n, alphabet_size):
        raise ValidationError(f"type index {index} out of range for n={n}, |alphabet|={alphabet_size}")
    counts = []
    remaining = n
    for i in range(alphabet_size - 1):
        parts_left = alphabet_size - i - 1
        v = 0
        while True:
            block = count_types(remaining - v, parts_left)
            if index < block:
                break
            index -= block
            v += 1
        counts.append(v)
        remaining -= v
    counts.append(remaining)
    return TypeVector(tuple(counts))


def count_shells(x_type: TypeVector, y_size: int) -> int:
    out = 1
    for c in x_type.counts:
        out *= count_types(c, y_size)
    return out


def shell_array(x_type: TypeVector, y_size: int, *, guard: int = ENUM_GUARD) -> np.ndarray:
    """All joint count matrices consistent with ``x_type``, shape ``(S, |X|, |Y|)``."""
    total = count_shells(x_type, y_size)
    if total > guard:
        raise GuardError(f"{total} shells exceed the enumeration guard {guard}", bound=guard)
    rows = [compositions_array(c, y_size) for c in x_type.counts]
    grids = np.meshgrid(*[np.arange(len(r)) for r in rows], indexing="ij")
    idx = [g.reshape(-1) for g in grids]
    return np.stack([rows[a][idx[a]] for a in range(len(rows))], axis=1)


def enumerate_shells(x_type: TypeVector, y_size: int, *, guard: int = ENUM_GUARD) -> Iterator[ShellDescriptor]:
    for joint in shell_array(x_type, y_size, guard=guard):
        yield ShellDescriptor(x_type, tuple(map(tuple, joint.tolist())))


def enumerate_shell_members(shell: ShellDescriptor, x) -> list[tuple[int, ...]]:
    """Brute force: every y in Y^n whose joint counts with ``x`` match the shell."""
    x = _as_sequence(x, shell.x_type.alphabet_size)
    target = shell.matrix
    y_size = shell.y_size
    out = []
    for y in np.ndindex(*([y_size] * x.size)):
        if np.array_equal(joint_counts(x, y, target.shape[0], y_size), target):
            out.append(tuple(y))
    return out


# --- typicality -------------------------------------------------------------

def type_is_typical(counts, p, delta: float) -> bool:
    counts = np.asarray(counts, dtype=float)
    p = np.asarray(p, dtype=float)
    n = counts.sum()
    if np.any((p == 0) & (counts > 0)):
        return False
    return bool(np.all(np.abs(counts / n - p) <= delta + _TYP_TOL))


def is_typical(x, p, delta: float) -> bool:
    """P-typicality with constant ``delta``."""
    if delta <= 0:
        raise ValidationError("delta must be positive")
    p = np.asarray(p, dtype=float)
    x = _as_sequence(x)
    if x.size and x.max() >= p.size:
        return False
    return type_is_typical(np.bincount(x, minlength=p.size), p, delta)


def shells_conditionally_typical(joint, w, delta_prime: float) -> np.ndarray:
    """Vectorised W-typicality of joint count matrices (``(..., |X|, |Y|)``)."""
    joint = np.asarray(joint, dtype=float)
    w = np.asarray(w, dtype=float)
    n = joint.sum(axis=(-2, -1))
    rows = joint.sum(axis=-1, keepdims=True)
    dev = np.abs(joint - rows * w)
    within = np.all(dev <= (delta_prime + _TYP_TOL) * n[..., None, None], axis=(-2, -1))
    no_forbidden = ~np.any((w == 0) & (joint > 0), axis=(-2, -1))
    return within & no_forbidden


def is_conditionally_typical(x, y, w, delta_prime: float) -> bool:
    """True iff ``y`` is W-generated by ``x`` with constant ``delta_prime``."""
    w = np.asarray(w, dtype=float)
    joint = joint_counts(x, y, *w.shape)
    return bool(shells_conditionally_typical(joint, w, delta_prime))


def log2_sequence_probability(counts, p) -> float | np.ndarray:
    """log2 of prod_a p(a)^counts(a) along the last axis; -inf on forbidden letters."""
    counts = np.asarray(counts, dtype=float)
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.log2(p)
        terms = np.where(counts > 0, counts * logp, 0.0)
    val = terms.sum(axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def log2_shell_probability(joint, w) -> float | np.ndarray:
    """log2 W^n(T_V(x) | x) for joint count matrices of shape ``(..., |X|, |Y|)``."""
    joint = np.asarray(joint)
    w = np.asarray(w, dtype=float)
    per_seq = log2_sequence_probability(joint, w)
    per_seq = np.asarray(per_seq).sum(axis=-1)
    val = np.asarray(log2_shell_size(joint)) + per_seq
    return float(val) if np.ndim(val) == 0 else val


def typical_mass_exact(p, n: int, delta: float, *, guard: int = ENUM_GUARD) -> float:
    """P^n of the set of P-typical sequences, by summing over types."""
    p = np.asarray(p, dtype=float)
    total = count_types(n, p.size)
    if total > guard:
        raise GuardError(f"{total} types exceed the enumeration guard {guard}", bound=guard)
    types = compositions_array(n, p.size)
    mask = np.array([type_is_typical(c, p, delta) for c in types], dtype=bool)
    if not mask.any():
        return 0.0
    logs = log2_multinomial(types[mask]) + log2_sequence_probability(types[mask], p)
    return float(min(1.0, np.exp2(logsumexp(np.asarray(logs) * _LN2) / _LN2)))


def conditional_typical_mass_exact(x_type: TypeVector, w, delta_prime: float, *, guard: int = ENUM_GUARD) -> float:
    """W^n of the W-generated set of any x of the given type."""
    w = np.asarray(w, dtype=float)
    shells = shell_array(x_type, w.shape[1], guard=guard)
    mask = shells_conditionally_typical(shells, w, delta_prime)
    if not mask.any():
        return 0.0
    logs = np.asarray(log2_shell_probability(shells[mask], w))
    logs = logs[np.isfinite(logs)]
    if logs.size == 0:
        return 0.0
    return float(min(1.0, np.exp2(logsumexp(logs * _LN2) / _LN2)))


# --- sampling ---------------------------------------------------------------

def sample_from_type_class(t: TypeVector, stream) -> np.ndarray:
    """Uniform member of the type class: Fisher-Yates shuffle of the sorted sequence."""
    seq = t.canonical_sequence().tolist()
    for i in range(len(seq) - 1, 0, -1):
        j = stream.bounded(i + 1)
        seq[i], seq[j] = seq[j], seq[i]
    return np.asarray(seq, dtype=np.int64)


def sample_from_shell(shell: ShellDescriptor, x, stream) -> np.ndarray:
    """Uniform member of the V-shell of ``x``: each x-letter's positions receive
    a uniform arrangement of that row's y-counts."""
    x = _as_sequence(x, shell.x_type.alphabet_size)
    if type_of(x, shell.x_type.alphabet_size) != shell.x_type:
        raise ValidationError("x does not have the shell's x-type")
    y = np.empty_like(x)
    for a, row in enumerate(shell.joint):
        pos = np.flatnonzero(x == a)
        y[pos] = sample_from_type_class(TypeVector(row), stream)
    return y
