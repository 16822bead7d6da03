"""Visible compression of a mixed-state source with shared randomness.

Alice sees the letter sequence ``x``. She gates on typicality of ``x``,
draws a conditional type ``V`` by sampling ``y* ~ W^n(.|x)``, gates on
conditional typicality, announces the output type ``P_y`` and the position
of the first entry of a shared random list drawn from ``T_{P_y}`` that lies
in the V-shell of ``x``. Bob prepares the product state of that entry, or a
fixed error state when Alice signals a failure.

Besides the Monte Carlo encoder/decoder this module evaluates Bob's average
density matrix and the resulting fidelity exactly, by enumerating shells.
"""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .ensemble import Ensemble, all_sequences, product_dictionary, uniform_output_mixture
from .errors import ProtocolViolation, SizeError, ValidationError
from .math_core import DIM_CAP, fidelity, tensor_power
from .rng import SharedRandomness
from .types_engine import (
    TypeVector,
    ShellDescriptor,
    count_types,
    is_typical,
    joint_counts,
    log2_multinomial,
    log2_shell_size,
    log2_sequence_probability,
    sample_from_shell,
    sample_from_type_class,
    shell_array,
    shell_marginal_type,
    shell_size,
    shells_conditionally_typical,
    type_class_size,
    type_from_index,
    type_index,
    type_is_typical,
    type_of,
    compositions_array,
)

_LN2 = math.log(2.0)

ERROR_POLICIES = ("uniform_Y_mixture", "maximally_mixed", "custom")


def floor_pow2(exponent: float) -> int:
    """floor(2**exponent) as an exact integer, for arbitrarily large exponents."""
    if exponent < 0:
        return 0
    ip = math.floor(exponent)
    frac = exponent - ip
    return math.floor(Fraction(2.0**frac) * (1 << ip))


@dataclass(frozen=True)
class ProtocolConfig:
    """Block length, rate and typicality constants.

    Give either ``rate`` (then ``N_l = floor(2**(n*rate))``) or ``list_size``
    (then the rate is ``log2(N_l)/n``). Typicality constants default to
    ``n**(-1/3)``.
    """

    n: int
    rate: float | None = None
    list_size: int | None = None
    delta: float | None = None
    delta_prime: float | None = None
    error_state: str = "uniform_Y_mixture"
    custom_error_letter: np.ndarray | None = field(default=None, compare=False)
    max_scan: int = 4096

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("block length n must be >= 1")
        if (self.rate is None) == (self.list_size is None):
            raise ValidationError("give exactly one of rate and list_size")
        if self.list_size is None:
            n_l = floor_pow2(self.n * self.rate)
            object.__setattr__(self, "list_size", n_l)
        else:
            object.__setattr__(self, "rate", math.log2(self.list_size) / self.n if self.list_size >= 1 else 0.0)
        if self.list_size < 1:
            raise ValidationError(f"list size {self.list_size} < 1; increase the rate")
        default = self.n ** (-1.0 / 3.0)
        if self.delta is None:
            object.__setattr__(self, "delta", default)
        if self.delta_prime is None:
            object.__setattr__(self, "delta_prime", default)
        if self.delta <= 0 or self.delta_prime <= 0:
            raise ValidationError("typicality constants must be positive")
        if self.error_state not in ERROR_POLICIES:
            raise ValidationError(f"error_state must be one of {ERROR_POLICIES}")
        if self.error_state == "custom" and self.custom_error_letter is None:
            raise ValidationError("custom error state needs custom_error_letter")

    @property
    def N_l(self) -> int:
        return self.list_size

    @property
    def effective_rate(self) -> float:
        return math.log2(self.list_size) / self.n


@dataclass(frozen=True)
class AsymptoticConstants:
    """Vanishing terms of the fidelity bound for a given configuration.

    ``eps_n`` and ``eps_prime_n`` bound the atypical probability masses;
    ``eps_n_proof`` and ``eps_prime_n_proof`` are the doubled constants that
    appear in the original proof chain and are reported for comparison only.
    """

    eps_n: float
    eps_prime_n: float
    eps_dprime_n: float
    eps_n_proof: float
    eps_prime_n_proof: float

    @classmethod
    def compute(cls, x_size: int, y_size: int, cfg: ProtocolConfig) -> "AsymptoticConstants":
        n, d, dp = cfg.n, cfg.delta, cfg.delta_prime
        return cls(
            eps_n=x_size / (4 * n * d * d),
            eps_prime_n=x_size * y_size / (4 * n * dp * dp),
            eps_dprime_n=x_size * y_size * math.log2(n + 1) / n,
            eps_n_proof=x_size / (2 * n * d * d),
            eps_prime_n_proof=x_size * y_size / (2 * n * dp * dp),
        )


class Variant(enum.IntEnum):
    ERR_ATYPICAL_X = 0
    ERR_ATYPICAL_V = 1
    PAYLOAD = 2
    ERR_NOT_ON_LIST = 3


FLAG_BITS = 2

_ERROR_TAGS = {
    Variant.ERR_ATYPICAL_X: "rho_e",
    Variant.ERR_ATYPICAL_V: "rho_e,x",
    Variant.ERR_NOT_ON_LIST: "rho_e,x(V)",
}


@dataclass(frozen=True)
class Message:
    variant: Variant
    type_index: int | None = None
    list_index: int | None = None
    bit_cost: int = FLAG_BITS

    def to_bytes(self) -> bytes:
        """1-byte variant tag, then little-endian u64 type and list indices where present."""
        out = bytes([int(self.variant)])
        for v in (self.type_index, self.list_index):
            if v is not None:
                out += struct.pack("<Q", v)
        return out

    @classmethod
    def from_bytes(cls, data: bytes, bit_cost: int = FLAG_BITS) -> "Message":
        variant = Variant(data[0])
        vals = [struct.unpack_from("<Q", data, 1 + 8 * i)[0] for i in range((len(data) - 1) // 8)]
        type_idx = vals[0] if len(vals) > 0 else None
        list_idx = vals[1] if len(vals) > 1 else None
        return cls(variant, type_idx, list_idx, bit_cost)


@dataclass(frozen=True)
class BobOutput:
    """Bob's preparation: a product state ``|Psi_y>`` or a named error state."""

    y: np.ndarray | None = None
    error_tag: str | None = None

    @property
    def is_error(self) -> bool:
        return self.error_tag is not None


@dataclass(frozen=True)
class EncodeResult:
    message: Message
    shell: ShellDescriptor | None
    y: np.ndarray | None
    accelerated: bool = False


def rate_accounting(cfg: ProtocolConfig, y_size: int) -> dict:
    """Bits for the type announcement, the list index and the flags."""
    n_types = count_types(cfg.n, y_size)
    type_bits = math.ceil(math.log2(n_types)) if n_types > 1 else 0
    index_bits = (cfg.N_l - 1).bit_length()
    total = type_bits + index_bits + FLAG_BITS
    return {
        "type_bits": type_bits,
        "index_bits": index_bits,
        "flag_bits": FLAG_BITS,
        "total_bits": total,
        "asymptotic_rate": math.log2(cfg.N_l) / cfg.n,
        "overhead_per_letter": (type_bits + FLAG_BITS) / cfg.n,
        "bits_per_letter": total / cfg.n,
    }


def _bit_cost(variant: Variant, cfg: ProtocolConfig, y_size: int) -> int:
    acct = rate_accounting(cfg, y_size)
    if variant == Variant.PAYLOAD:
        return acct["total_bits"]
    if variant == Variant.ERR_NOT_ON_LIST:
        return acct["type_bits"] + FLAG_BITS
    return FLAG_BITS


def _list_entry(py: TypeVector, shared: SharedRandomness, trial: int, index: int) -> np.ndarray:
    return sample_from_type_class(py, shared.stream("list", trial, index))


def shell_ratio(shell: ShellDescriptor) -> Fraction:
    """|T_V(x)| / |T_{P_y}| as an exact fraction."""
    return Fraction(shell_size(shell), type_class_size(shell_marginal_type(shell)))


def encode_with_details(e: Ensemble, x, cfg: ProtocolConfig, shared: SharedRandomness, trial: int = 0) -> EncodeResult:
    """Alice's encoder; also returns the chosen shell and the selected y."""
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    if x.size != cfg.n:
        raise ValidationError(f"sequence length {x.size} differs from block length {cfg.n}")
    if x.size and (x.min() < 0 or x.max() >= e.x_size):
        raise ValidationError("sequence has symbols outside the source alphabet")
    y_size = e.y_size

    def msg(variant, t_idx=None, l_idx=None):
        return Message(variant, t_idx, l_idx, _bit_cost(variant, cfg, y_size))

    if not is_typical(x, e.P, cfg.delta):
        return EncodeResult(msg(Variant.ERR_ATYPICAL_X), None, None)

    chan = shared.stream("channel", trial)
    cdfs = np.cumsum(e.W, axis=1)
    y_star = np.array([chan.categorical(cdfs[a]) for a in x], dtype=np.int64)
    shell = ShellDescriptor.from_sequences(x, y_star, e.x_size, y_size)
    if not shells_conditionally_typical(shell.matrix, e.W, cfg.delta_prime):
        return EncodeResult(msg(Variant.ERR_ATYPICAL_V), shell, None)

    py = shell_marginal_type(shell)
    t_idx = type_index(py)
    target = shell.matrix

    if cfg.N_l <= cfg.max_scan:
        for i in range(cfg.N_l):
            cand = _list_entry(py, shared, trial, i)
            if np.array_equal(joint_counts(x, cand, e.x_size, y_size), target):
                return EncodeResult(msg(Variant.PAYLOAD, t_idx, i), shell, cand)
        return EncodeResult(msg(Variant.ERR_NOT_ON_LIST, t_idx), shell, None)

    # list too long to scan: draw the first-hit position from its exact law and
    # the hit itself uniformly from the shell
    r = float(shell_ratio(shell))
    first = shared.stream("geom", trial).geometric_failures(r)
    if first < cfg.N_l:
        y = sample_from_shell(shell, x, shared.stream("hit", trial))
        return EncodeResult(msg(Variant.PAYLOAD, t_idx, int(first)), shell, y, accelerated=True)
    return EncodeResult(msg(Variant.ERR_NOT_ON_LIST, t_idx), shell, None, accelerated=True)


def alice_encode(e: Ensemble, x, cfg: ProtocolConfig, shared: SharedRandomness, trial: int = 0) -> Message:
    return encode_with_details(e, x, cfg, shared, trial).message


def bob_decode(
    e: Ensemble,
    msg: Message,
    cfg: ProtocolConfig,
    shared: SharedRandomness,
    trial: int = 0,
    expected_y=None,
) -> BobOutput:
    """Regenerate the announced list entry, or name the error state.

    ``expected_y`` lets a caller that knows Alice's choice verify that both
    sides drew the same list; a mismatch raises :class:`ProtocolViolation`.
    """
    if msg.variant != Variant.PAYLOAD:
        return BobOutput(error_tag=_ERROR_TAGS[msg.variant])
    n_types = count_types(cfg.n, e.y_size)
    if msg.type_index is None or not 0 <= msg.type_index < n_types:
        raise ProtocolViolation(f"type index {msg.type_index} outside [0, {n_types})")
    if msg.list_index is None or not 0 <= msg.list_index < cfg.N_l:
        raise ProtocolViolation(f"list index {msg.list_index} outside [0, {cfg.N_l})")
    py = type_from_index(msg.type_index, cfg.n, e.y_size)
    y = _list_entry(py, shared, trial, msg.list_index)
    if expected_y is not None and not np.array_equal(y, np.asarray(expected_y)):
        raise ProtocolViolation("decoded list entry differs from the encoder's; shared randomness is misaligned")
    return BobOutput(y=y)


# --- exact evaluation ---------------------------------------------------------

@dataclass(frozen=True)
class ErrorProbability:
    """Exact list-failure probability and the bound chain above it."""

    p_e: float
    log2_ratio: float
    exp_bound: float
    rate_bound: float
    mutual_info: float
    log2_p_e: float = 0.0


def _log_pe(log2_ratio, n_l: int):
    """Natural log of (1 - ratio)^N_l, elementwise."""
    log2_ratio = np.asarray(log2_ratio, dtype=float)
    # log-gamma rounding; a true ratio this close to 1 needs astronomically long blocks
    ratio = np.where(log2_ratio > -1e-12, 1.0, np.exp2(log2_ratio))
    nl = float(n_l) if n_l < 2**1000 else math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = nl * np.log1p(-ratio)
    return np.where(ratio >= 1.0, -np.inf, lp)


def error_prob_exact(x_type: TypeVector, shell: ShellDescriptor, n_l: int) -> ErrorProbability:
    """p_e = (1 - |T_V(x)| / |T_{P_y}|)^N_l, evaluated in the log domain."""
    from .info_measures import mutual_information_from_counts

    if shell.x_type != x_type:
        raise ValidationError("shell does not belong to the given x-type")
    n = x_type.n
    exact = shell_ratio(shell)
    log2_ratio = math.log2(exact.numerator) - math.log2(exact.denominator)
    lp = -math.inf if exact == 1 else float(_log_pe(log2_ratio, n_l))
    ratio = float(exact)
    exp_bound = math.exp(-float(n_l) * ratio) if n_l < 2**1000 else 0.0
    mi = mutual_information_from_counts(shell.matrix)
    x_size, y_size = shell.matrix.shape
    eps_dd = x_size * y_size * math.log2(n + 1) / n
    rate = math.log2(n_l) / n
    expo = n * (rate - mi - eps_dd)
    rate_bound = math.exp(-(2.0**expo)) if expo < 1000 else 0.0
    return ErrorProbability(math.exp(lp), log2_ratio, exp_bound, rate_bound, mi, lp / _LN2)


@dataclass
class ShellTable:
    """Every V-shell of a fixed x, with the quantities the exact evaluators need.

    Probabilities are natural logs (``ln_*``) to work with ``logsumexp``.
    """

    x_type: TypeVector
    x_typical: bool
    joints: np.ndarray
    ln_size: np.ndarray
    ln_w_seq: np.ndarray
    ln_prob: np.ndarray
    typical: np.ndarray
    ln_pe: np.ndarray

    @property
    def p_e(self) -> np.ndarray:
        return np.exp(self.ln_pe)

    def error_mass(self) -> float:
        """Probability that Bob ends in an error state, given x."""
        if not self.x_typical:
            return 1.0
        prob = np.exp(self.ln_prob)
        return float(min(1.0, np.sum(prob[self.typical] * self.p_e[self.typical]) + np.sum(prob[~self.typical])))

    def p_e_max(self) -> float:
        if not self.x_typical or not self.typical.any():
            return 0.0
        return float(self.p_e[self.typical].max())


def shell_table(e: Ensemble, x_type: TypeVector, cfg: ProtocolConfig) -> ShellTable:
    joints = shell_array(x_type, e.y_size)
    ln_size = np.asarray(log2_shell_size(joints)) * _LN2
    ln_w_seq = np.asarray(log2_sequence_probability(joints, e.W)).sum(axis=-1) * _LN2
    ln_prob = ln_size + ln_w_seq
    typical = shells_conditionally_typical(joints, e.W, cfg.delta_prime) & np.isfinite(ln_w_seq)
    y_types = joints.sum(axis=1)
    log2_ratio = np.minimum(0.0, np.asarray(log2_shell_size(joints)) - np.asarray(log2_multinomial(y_types)))
    ln_pe = _log_pe(log2_ratio, cfg.N_l)
    x_typical = type_is_typical(x_type.counts, e.P, cfg.delta)
    return ShellTable(x_type, x_typical, joints, ln_size, ln_w_seq, ln_prob, typical, ln_pe)


def error_state(e: Ensemble, cfg: ProtocolConfig, *, cap: int = DIM_CAP) -> np.ndarray:
    """Bob's fixed error state for block length ``cfg.n``."""
    if cfg.error_state == "uniform_Y_mixture":
        return uniform_output_mixture(e, cfg.n, cap=cap)
    if cfg.error_state == "maximally_mixed":
        dim = e.dim**cfg.n
        if dim > cap:
            raise SizeError(f"dimension {dim} exceeds cap {cap}")
        return np.eye(dim, dtype=complex) / dim
    return tensor_power(np.asarray(cfg.custom_error_letter, dtype=complex), cfg.n, cap=cap)


def _y_shell_index(x: np.ndarray, ys: np.ndarray, table: ShellTable, y_size: int) -> np.ndarray:
    """For each y (row of ``ys``), the index of its shell in ``table.joints``."""
    x_size = table.joints.shape[1]
    codes = np.zeros(ys.shape[0], dtype=np.int64)
    base = x.size + 1
    for a in range(x_size):
        for b in range(y_size):
            codes = codes * base + np.sum((x[None, :] == a) & (ys == b), axis=1)
    shell_codes = np.zeros(table.joints.shape[0], dtype=np.int64)
    for a in range(x_size):
        for b in range(y_size):
            shell_codes = shell_codes * base + table.joints[:, a, b]
    order = np.argsort(shell_codes)
    pos = np.searchsorted(shell_codes[order], codes)
    return order[pos]


def bob_density_exact(e: Ensemble, x, cfg: ProtocolConfig, *, cap: int = DIM_CAP) -> np.ndarray:
    """Bob's average state given ``x``, averaged over the shared randomness."""
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    if x.size != cfg.n:
        raise ValidationError(f"sequence length {x.size} differs from block length {cfg.n}")
    rho_err = error_state(e, cfg, cap=cap)
    table = shell_table(e, type_of(x, e.x_size), cfg)
    if not table.x_typical:
        return rho_err
    psi_all = product_dictionary(e, cfg.n, cap=cap)
    ys = all_sequences(e.y_size, cfg.n)
    idx = _y_shell_index(x, ys, table, e.y_size)
    keep = table.typical[idx]
    weights = np.zeros(ys.shape[0])
    # per-sequence weight inside a typical shell: W^n(y|x) (1 - p_e(V))
    weights[keep] = np.exp(table.ln_w_seq[idx[keep]]) * (-np.expm1(table.ln_pe[idx[keep]]))
    pure_part = (psi_all * weights) @ psi_all.conj().T
    return pure_part + table.error_mass() * rho_err


def commuting_fidelity_from_table(table: ShellTable, e: Ensemble, cfg: ProtocolConfig) -> float:
    """Fidelity for orthonormal dictionaries, grouped by shell."""
    n = cfg.n
    if cfg.error_state == "uniform_Y_mixture":
        ln_err_seq = -n * math.log(e.y_size)
    elif cfg.error_state == "maximally_mixed":
        ln_err_seq = -n * math.log(e.dim)
    else:
        raise ValidationError("the commuting closed form needs a uniform or maximally mixed error state")
    err = table.error_mass()
    ln_err = (math.log(err) if err > 0 else -np.inf) + ln_err_seq
    finite = np.isfinite(table.ln_w_seq)
    ln_w = table.ln_w_seq[finite]
    with np.errstate(divide="ignore"):
        ln_keep = np.log(-np.expm1(table.ln_pe[finite]))
    if table.x_typical:
        ln_pure = np.where(table.typical[finite], ln_w + ln_keep, -np.inf)
    else:
        ln_pure = np.full(ln_w.shape, -np.inf)
    ln_hat = np.logaddexp(ln_pure, ln_err)
    terms = table.ln_size[finite] + 0.5 * (ln_w + ln_hat)
    terms = terms[np.isfinite(terms)]
    if terms.size == 0:
        return 0.0
    from scipy.special import logsumexp

    return float(min(1.0, math.exp(2.0 * logsumexp(terms))))


@dataclass
class FidelityReport:
    fidelity: float
    p_e_max: float
    constants: AsymptoticConstants
    per_type: list = field(default_factory=list)
    method: str = "matrix"

    @property
    def bound(self) -> float:
        return 1.0 - self.p_e_max - self.constants.eps_n - self.constants.eps_prime_n

    @property
    def bound_holds(self) -> bool:
        return self.fidelity >= self.bound - 1e-12


def _choose_method(e: Ensemble, cfg: ProtocolConfig, method: str) -> str:
    if method != "auto":
        return method
    if e.is_orthogonal() and cfg.error_state in ("uniform_Y_mixture", "maximally_mixed"):
        return "commuting"
    return "matrix"


def fidelity_for_x(e: Ensemble, x, cfg: ProtocolConfig, method: str = "auto") -> float:
    """F(rho_x, Bob's average state) for one source sequence."""
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    method = _choose_method(e, cfg, method)
    if method == "commuting":
        if not e.is_orthogonal():
            raise ValidationError("commuting evaluation needs an orthonormal dictionary")
        return commuting_fidelity_from_table(shell_table(e, type_of(x, e.x_size), cfg), e, cfg)
    return fidelity(e.sequence_density(x), bob_density_exact(e, x, cfg))


def _x_type_log2_prob(e: Ensemble, t: TypeVector) -> float:
    return float(log2_multinomial(t.counts)) + float(log2_sequence_probability(t.counts, e.P))


def expected_fidelity_exact(
    e: Ensemble, cfg: ProtocolConfig, *, method: str = "auto", exhaustive: bool = False
) -> FidelityReport:
    """sum_x P^n(x) F(rho_x, Bob's state), with the theorem's lower bound attached.

    The fidelity depends on ``x`` only through its type (permuting tensor
    factors is a unitary that maps both states consistently), so one
    representative per type suffices; ``exhaustive=True`` sums over every
    ``x`` instead, as a check of that symmetry.
    """
    method = _choose_method(e, cfg, method)
    consts = AsymptoticConstants.compute(e.x_size, e.y_size, cfg)
    per_type = []
    total = []
    pe_max = 0.0
    types = compositions_array(cfg.n, e.x_size)
    for counts in types:
        t = TypeVector(tuple(counts))
        table = shell_table(e, t, cfg)
        pe_max = max(pe_max, table.p_e_max())
        log2_p = _x_type_log2_prob(e, t)
        if not np.isfinite(log2_p):
            continue
        if exhaustive:
            xs = [xx for xx in all_sequences(e.x_size, cfg.n) if tuple(np.bincount(xx, minlength=e.x_size)) == t.counts]
            log2_px = float(log2_sequence_probability(t.counts, e.P))
            fs = [fidelity_for_x(e, xx, cfg, method) for xx in xs]
            contrib = [2.0**log2_px * f for f in fs]
            f_type = math.fsum(fs) / len(fs)
            total.extend(contrib)
        else:
            rep = t.canonical_sequence()
            if method == "commuting":
                f_type = commuting_fidelity_from_table(table, e, cfg)
            else:
                f_type = fidelity_for_x(e, rep, cfg, method)
            total.append(2.0**log2_p * f_type)
        per_type.append({"counts": t.counts, "prob": 2.0**log2_p, "fidelity": f_type, "typical": table.x_typical,
                         "p_e_max": table.p_e_max()})
    return FidelityReport(min(1.0, math.fsum(total)), pe_max, consts, per_type, method)


# --- Monte Carlo trials -------------------------------------------------------

@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    x: np.ndarray
    message: Message
    bob_output: BobOutput
    fidelity_contrib: float | None
    accelerated: bool = False

    def record(self) -> dict:
        rec = {
            "trial": self.trial,
            "variant": self.message.variant.name,
            "bits": self.message.bit_cost,
            "y_len": 0 if self.bob_output.y is None else int(self.bob_output.y.size),
        }
        if self.fidelity_contrib is not None:
            rec["fidelity"] = self.fidelity_contrib
        return rec


@dataclass
class TrialStats:
    trials: int
    variant_counts: dict
    mean_fidelity: float | None
    mean_bits_per_letter: float
    accelerated_trials: int

    def frequency(self, variant: Variant) -> float:
        return self.variant_counts.get(variant.name, 0) / self.trials

    def as_dict(self) -> dict:
        out = {
            "trials": self.trials,
            "mean_fidelity": self.mean_fidelity,
            "mean_bits_per_letter": self.mean_bits_per_letter,
            "accelerated_trials": self.accelerated_trials,
        }
        for v in Variant:
            out[f"freq_{v.name}"] = self.frequency(v)
        return out


def sample_source(e: Ensemble, n: int, shared: SharedRandomness, trial: int) -> np.ndarray:
    s = shared.stream("source", trial)
    cdf = np.cumsum(e.P)
    return np.array([s.categorical(cdf) for _ in range(n)], dtype=np.int64)


class _FidelityCache:
    def __init__(self, e: Ensemble, cfg: ProtocolConfig):
        self.e, self.cfg = e, cfg
        self.cache: dict = {}
        self.method = _choose_method(e, cfg, "auto")
        if self.method == "matrix" and e.dim**cfg.n > DIM_CAP:
            self.method = None

    def __call__(self, x: np.ndarray) -> float | None:
        if self.method is None:
            return None
        key = tuple(np.bincount(x, minlength=self.e.x_size).tolist())
        if key not in self.cache:
            rep = TypeVector(key).canonical_sequence()
            self.cache[key] = fidelity_for_x(self.e, rep, self.cfg, self.method)
        return self.cache[key]


def run_trial(e: Ensemble, cfg: ProtocolConfig, shared: SharedRandomness, trial: int, fid=None) -> TrialOutcome:
    x = sample_source(e, cfg.n, shared, trial)
    enc = encode_with_details(e, x, cfg, shared, trial)
    if enc.accelerated:
        # the accelerated encoder has no materialised list for Bob to index into
        out = BobOutput(y=enc.y) if enc.y is not None else BobOutput(error_tag=_ERROR_TAGS[enc.message.variant])
    else:
        out = bob_decode(e, enc.message, cfg, shared, trial, expected_y=enc.y)
    f = fid(x) if fid is not None else None
    return TrialOutcome(trial, x, enc.message, out, f, enc.accelerated)


def aggregate(outcomes: Iterable[TrialOutcome]) -> TrialStats:
    """Order-independent summary: counts and exactly rounded sums."""
    counts: dict = {}
    fids, bits = [], []
    total = accelerated = 0
    for o in outcomes:
        total += 1
        counts[o.message.variant.name] = counts.get(o.message.variant.name, 0) + 1
        bits.append(o.message.bit_cost / o.x.size)
        accelerated += int(o.accelerated)
        if o.fidelity_contrib is not None:
            fids.append(o.fidelity_contrib)
    if total == 0:
        raise ValidationError("no trials to aggregate")
    mean_f = math.fsum(fids) / len(fids) if len(fids) == total else None
    return TrialStats(total, dict(sorted(counts.items())), mean_f, math.fsum(bits) / total, accelerated)


def run_trials(
    e: Ensemble,
    cfg: ProtocolConfig,
    trials: int,
    master_seed: int,
    *,
    records_path=None,
    with_fidelity: bool = True,
) -> TrialStats:
    """Monte Carlo over source sequences; optional JSON-lines trial log."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    shared = SharedRandomness(master_seed)
    fid = _FidelityCache(e, cfg) if with_fidelity else None
    outcomes = [run_trial(e, cfg, shared, t, fid) for t in range(trials)]
    if records_path is not None:
        with open(records_path, "a", encoding="utf-8") as fh:
            for o in outcomes:
                fh.write(json.dumps(o.record(), sort_keys=True) + "\n")
    return aggregate(outcomes)
