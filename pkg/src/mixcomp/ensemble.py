"""Mixed-state ensembles built from a pure-state dictionary and a channel.

Letter ``a`` of the source alphabet is the mixed state
``rho_a = sum_b W(b|a) |psi_b><psi_b|``. An :class:`Ensemble` holds the prior,
the channel and the dictionary; everything else is derived on demand.
"""

from __future__ import annotations

import configparser
import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import info_measures as im
from .errors import ConfigError, SizeError, ValidationError
from .math_core import DIM_CAP, density_matrix, projector, pure_state, tensor_power, tensor_product

log = logging.getLogger(__name__)

ROW_DISTINCT_TOL = 1e-9
ORTHO_TOL = 1e-12
EXPANSION_GUARD = 50_000_000


@dataclass(frozen=True)
class EnsembleDerived:
    Q: np.ndarray
    U: np.ndarray
    rho_letters: tuple[np.ndarray, ...]
    rho: np.ndarray


@dataclass(frozen=True, eq=False)
class Ensemble:
    P: np.ndarray
    W: np.ndarray
    psi: tuple[np.ndarray, ...]
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        p = im.distribution(self.P).copy()
        w = im.channel(self.W).copy()
        if w.shape[0] != p.size:
            raise ValidationError(f"prior has {p.size} letters but channel has {w.shape[0]} rows")
        psi = tuple(pure_state(v) for v in self.psi)
        if len(psi) != w.shape[1]:
            raise ValidationError(f"channel has {w.shape[1]} outputs but {len(psi)} states were given")
        if len({v.size for v in psi}) != 1:
            raise ValidationError("all dictionary states must have the same dimension")
        for a in range(w.shape[0]):
            for a2 in range(a + 1, w.shape[0]):
                if np.max(np.abs(w[a] - w[a2])) <= ROW_DISTINCT_TOL:
                    raise ValidationError(
                        f"channel rows {a} and {a2} are identical: no two states of the ensemble may be identical"
                    )
        q = p @ w
        if np.any(q <= 0):
            raise ValidationError(
                "output letters with Q(b)=0 must be removed before building an ensemble "
                "(use strip_unused_outputs)"
            )
        for name, val in (("P", p), ("W", w)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        for v in psi:
            v.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    def __eq__(self, other):
        if not isinstance(other, Ensemble):
            return NotImplemented
        return (
            np.array_equal(self.P, other.P)
            and np.array_equal(self.W, other.W)
            and len(self.psi) == len(other.psi)
            and all(np.array_equal(a, b) for a, b in zip(self.psi, other.psi))
        )

    __hash__ = None

    @property
    def x_size(self) -> int:
        return self.W.shape[0]

    @property
    def y_size(self) -> int:
        return self.W.shape[1]

    @property
    def dim(self) -> int:
        return self.psi[0].size

    @property
    def dictionary(self) -> np.ndarray:
        """Matrix whose column ``b`` is ``psi_b``."""
        return np.stack(self.psi, axis=1)

    def is_orthogonal(self, tol: float = ORTHO_TOL) -> bool:
        g = self.dictionary.conj().T @ self.dictionary
        return bool(np.max(np.abs(g - np.eye(self.y_size))) <= tol)

    def derived(self) -> EnsembleDerived:
        return _derive(self)

    def sequence_density(self, x, *, cap: int = DIM_CAP) -> np.ndarray:
        """rho_x = rho_{x_1} (x) ... (x) rho_{x_n}."""
        x = np.asarray(x, dtype=np.int64).reshape(-1)
        if self.dim ** x.size > cap:
            raise SizeError(f"dimension {self.dim}^{x.size} exceeds cap {cap}")
        letters = self.derived().rho_letters
        out = np.ones((1, 1), dtype=complex)
        for a in x:
            out = tensor_product(out, letters[int(a)], cap=cap)
        return out

    def sequence_density_expansion(self, x, *, cap: int = DIM_CAP) -> np.ndarray:
        """rho_x as the mixture sum_y W^n(y|x) |Psi_y><Psi_y|, by brute force over Y^n."""
        x = np.asarray(x, dtype=np.int64).reshape(-1)
        psi_all = product_dictionary(self, x.size, cap=cap)
        weights = np.exp2(log2_channel_weights(self, x))
        return (psi_all * weights) @ psi_all.conj().T


def _derive(e: Ensemble) -> EnsembleDerived:
    cached = getattr(e, "_derived_cache", None)
    if cached is not None:
        return cached
    q, u = im.reverse_channel(e.P, e.W)
    projs = [projector(v) for v in e.psi]
    letters = tuple(
        density_matrix(sum(e.W[a, b] * projs[b] for b in range(e.y_size)), hermitian_tol=1e-10)
        for a in range(e.x_size)
    )
    rho = sum(pa * r for pa, r in zip(e.P, letters))
    rho = density_matrix(rho, hermitian_tol=1e-10)
    for arr in (q, u, rho, *letters):
        arr.setflags(write=False)
    out = EnsembleDerived(Q=q, U=u, rho_letters=letters, rho=rho)
    object.__setattr__(e, "_derived_cache", out)
    return out


def product_dictionary(e: Ensemble, n: int, *, cap: int = DIM_CAP) -> np.ndarray:
    """Matrix whose columns are |Psi_y> for every y in Y^n, in lexicographic order."""
    if e.dim**n > cap:
        raise SizeError(f"dimension {e.dim}^{n} exceeds cap {cap}")
    if (e.dim * e.y_size) ** n > EXPANSION_GUARD:
        raise SizeError(f"product dictionary with {(e.dim * e.y_size) ** n} entries exceeds guard {EXPANSION_GUARD}")
    phi = e.dictionary
    out = np.ones((1, 1), dtype=complex)
    for _ in range(n):
        out = np.kron(out, phi)
    return out


def all_sequences(size: int, n: int) -> np.ndarray:
    """Every sequence in {0..size-1}^n as rows, lexicographic (matches np.kron ordering)."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.meshgrid(*([np.arange(size)] * n), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1).astype(np.int64)


def log2_channel_weights(e: Ensemble, x) -> np.ndarray:
    """log2 W^n(y|x) for every y in Y^n in lexicographic order."""
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    with np.errstate(divide="ignore"):
        logw = np.log2(e.W)
    ys = all_sequences(e.y_size, x.size)
    return logw[x[None, :], ys].sum(axis=1)


def uniform_output_mixture(e: Ensemble, n: int, *, cap: int = DIM_CAP) -> np.ndarray:
    """|Y|^-n sum_y |Psi_y><Psi_y| = (uniform letter mixture)^{(x) n}."""
    letter = sum(projector(v) for v in e.psi) / e.y_size
    return tensor_power(letter, n, cap=cap)


# --- builtins -----------------------------------------------------------------

def builtin_trine() -> Ensemble:
    """Two mixed qubit states built from three states at 120 degrees."""
    s = math.sqrt(3.0) / 2.0
    psi = (np.array([1.0, 0.0]), np.array([-0.5, s]), np.array([-0.5, -s]))
    w = np.array([[2 / 3, 1 / 3, 0.0], [0.0, 1 / 3, 2 / 3]])
    return Ensemble(P=np.array([0.5, 0.5]), W=w, psi=psi, name="trine")


def builtin_two_coins(w: float, prior=(0.5, 0.5)) -> Ensemble:
    """Two biased coins, each face an orthogonal basis state."""
    if not 0.0 < w < 1.0 or w == 0.5:
        raise ValidationError(f"two-coins bias w={w!r} must lie in (0, 1) and differ from 1/2")
    chan = np.array([[1.0 - w, w], [w, 1.0 - w]])
    psi = (np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    return Ensemble(P=np.asarray(prior, dtype=float), W=chan, psi=psi, name=f"two-coins:w={w:g}")


def strip_unused_outputs(p, w, psi):
    """Drop output letters with Q(b) = 0, logging a warning for each one."""
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    q = p @ w
    keep = np.flatnonzero(q > 0)
    if keep.size < w.shape[1]:
        dropped = sorted(set(range(w.shape[1])) - set(keep.tolist()))
        log.warning("dropping output letters %s with zero probability", dropped)
    return w[:, keep], [psi[b] for b in keep]


# --- config files -------------------------------------------------------------

_SQRT = re.compile(r"^([+-]?)(?:(\d+(?:/\d+)?)\*)?sqrt\(([0-9./]+)\)(?:/(\d+))?$")


def parse_number(token: str) -> float:
    """Parse ``3``, ``-2/3``, ``0.25``, ``sqrt(3)/2`` or ``-1/2*sqrt(3)``."""
    token = token.strip()
    m = _SQRT.match(token)
    if m:
        sign, coef, radicand, denom = m.groups()
        val = math.sqrt(float(Fraction(radicand)))
        if coef:
            val *= float(Fraction(coef))
        if denom:
            val /= int(denom)
        return -val if sign == "-" else val
    try:
        return float(Fraction(token))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse number {token!r}") from exc


def _parse_exact(token: str) -> Fraction | float:
    try:
        return Fraction(token.strip())
    except ValueError:
        return parse_number(token)


def _parse_row(text: str) -> list:
    return [_parse_exact(t) for t in text.replace(",", " ").split()]


def _parse_amplitudes(text: str) -> np.ndarray:
    out = []
    for tok in text.split():
        if "," in tok:
            re_s, im_s = tok.split(",", 1)
            out.append(complex(parse_number(re_s), parse_number(im_s)))
        else:
            out.append(complex(parse_number(tok), 0.0))
    return np.array(out, dtype=complex)


def _normalize_exact(values: list, what: str) -> np.ndarray:
    """Rows written as exact fractions that sum to exactly 1 are kept exact; the
    float row then sums to 1 within rounding."""
    if all(isinstance(v, Fraction) for v in values) and sum(values) != 1:
        raise ConfigError(f"{what} sums to {sum(values)}, expected 1")
    return np.array([float(v) for v in values])


def load_ensemble(text: str) -> Ensemble:
    """Parse an ensemble from INI-style config text.

    Sections: ``[alphabets]`` (``X_size``, ``Y_size``, ``d``), ``[prior]``
    (``P``), ``[channel]`` (``row0``, ``row1``, ...), ``[states]`` (``psi0``,
    ``psi1``, ...). Numbers may be fractions; amplitudes are ``re`` or
    ``re,im`` tokens separated by whitespace.
    """
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    for sec in ("alphabets", "prior", "channel", "states"):
        if not cp.has_section(sec):
            raise ConfigError(f"missing section [{sec}]")
    try:
        x_size = cp.getint("alphabets", "X_size")
        y_size = cp.getint("alphabets", "Y_size")
        dim = cp.getint("alphabets", "d")
        p_raw = _parse_row(cp.get("prior", "P"))
    except (configparser.Error, ValueError) as exc:
        raise ConfigError(f"bad [alphabets]/[prior] section: {exc}") from exc
    if len(p_raw) != x_size:
        raise ConfigError(f"prior has {len(p_raw)} entries, X_size is {x_size}")
    p = _normalize_exact(p_raw, "prior")
    rows = []
    for a in range(x_size):
        key = f"row{a}"
        if not cp.has_option("channel", key):
            raise ConfigError(f"[channel] is missing {key}")
        raw = _parse_row(cp.get("channel", key))
        if len(raw) != y_size:
            raise ConfigError(f"{key} has {len(raw)} entries, Y_size is {y_size}")
        rows.append(_normalize_exact(raw, key))
    psi = []
    for b in range(y_size):
        key = f"psi{b}"
        if not cp.has_option("states", key):
            raise ConfigError(f"[states] is missing {key}")
        v = _parse_amplitudes(cp.get("states", key))
        if v.size != dim:
            raise ConfigError(f"{key} has {v.size} amplitudes, d is {dim}")
        psi.append(v)
    w = np.array(rows)
    try:
        w = im.channel(w)
        p = im.distribution(p)
        w, psi = strip_unused_outputs(p, w, psi)
        return Ensemble(P=p, W=w, psi=tuple(psi), name="config")
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def resolve_ensemble(spec: str) -> Ensemble:
    """``trine``, ``two-coins:w=<float>`` or a path to a config file."""
    if spec == "trine":
        return builtin_trine()
    if spec.startswith("two-coins"):
        m = re.fullmatch(r"two-coins(?::w=([0-9.eE+-]+))?", spec)
        if not m:
            raise ConfigError(f"cannot parse builtin {spec!r}; expected two-coins:w=<float>")
        return builtin_two_coins(float(m.group(1) or 0.1))
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"ensemble {spec!r} is neither a builtin nor an existing file")
    ens = load_ensemble(path.read_text())
    object.__setattr__(ens, "name", path.stem)
    return ens


TRINE_CONFIG = """\
[alphabets]
X_size = 2
Y_size = 3
d = 2

[prior]
P = 1/2 1/2

[channel]
row0 = 2/3 1/3 0
row1 = 0 1/3 2/3

[states]
psi0 = 1 0
psi1 = -1/2 sqrt(3)/2
psi2 = -1/2 -sqrt(3)/2
"""
