"""Recompute the frozen reference values in tests/oracles.json.

Deliberately independent of the package: brute-force enumeration over all
sequences, mpmath for closed forms, and a separate log-domain evaluator
for the large commuting instance. Run with ``--check`` to compare against
the frozen file instead of rewriting it.
"""

import argparse
import itertools
import json
import math
from pathlib import Path

import mpmath as mp
import numpy as np

FROZEN = Path(__file__).resolve().parents[1] / "tests" / "oracles.json"

TRINE_W = [[2 / 3, 1 / 3, 0.0], [0.0, 1 / 3, 2 / 3]]
TRINE_PSI = [np.array([1.0, 0.0]), np.array([-0.5, math.sqrt(3) / 2]), np.array([-0.5, -math.sqrt(3) / 2])]


def h_mp(x):
    x = mp.mpf(x)
    return -x * mp.log(x, 2) - (1 - x) * mp.log(1 - x, 2)


def trine_holevo():
    lam = mp.mpf(1) / 2 - mp.sqrt(3) / 6
    s_bar = h_mp(lam)
    return {"S_bar": float(s_bar), "chi": float(1 - s_bar), "rho1_eig_low": float(lam)}


def joint(x, y, nx, ny):
    m = [[0] * ny for _ in range(nx)]
    for a, b in zip(x, y):
        m[a][b] += 1
    return m


def cond_typical(x, y, w, dp):
    n = len(x)
    m = joint(x, y, len(w), len(w[0]))
    nx = [x.count(a) for a in range(len(w))]
    for a in range(len(w)):
        for b in range(len(w[0])):
            if w[a][b] == 0 and m[a][b] > 0:
                return False
            if abs(m[a][b] / n - nx[a] * w[a][b] / n) > dp + 1e-12:
                return False
    return True


def seq_prob(x, y, w):
    p = 1.0
    for a, b in zip(x, y):
        p *= w[a][b]
    return p


def cond_mass_brute(x, w, dp):
    total = 0.0
    for y in itertools.product(range(len(w[0])), repeat=len(x)):
        if cond_typical(list(x), list(y), w, dp):
            total += seq_prob(x, y, w)
    return total


def binom_typical_mass(n, delta):
    tot = mp.mpf(0)
    for k in range(n + 1):
        if abs(mp.mpf(k) / n - mp.mpf(1) / 2) <= delta + mp.mpf(1e-12):
            tot += mp.binomial(n, k) / mp.mpf(2) ** n
    return float(tot)


def fid(a, b):
    def sqrtm(m):
        lam, v = np.linalg.eigh(m)
        return (v * np.sqrt(np.clip(lam, 0, None))) @ v.conj().T

    s = sqrtm(a)
    lam = np.linalg.eigvalsh(s @ b @ s)
    return float(np.sum(np.sqrt(np.clip(lam, 0, None))) ** 2)


def trine_expected_fidelity(n, rate):
    """Bob's average state built by summing over every y, per source sequence."""
    w, psi = TRINE_W, TRINE_PSI
    delta = dp = n ** (-1 / 3)
    n_l = math.floor(2 ** (n * rate))
    ys = list(itertools.product(range(3), repeat=n))

    def ket(y):
        v = np.array([1.0])
        for b in y:
            v = np.kron(v, psi[b])
        return v

    kets = {y: ket(y) for y in ys}
    rho_err = sum(np.outer(kets[y], kets[y]) for y in ys) / len(ys)
    total = 0.0
    for x in itertools.product(range(2), repeat=n):
        px = 0.5**n
        rho_x = sum(seq_prob(x, y, w) * np.outer(kets[y], kets[y]) for y in ys)
        typical = all(abs(x.count(a) / n - 0.5) <= delta + 1e-12 for a in range(2))
        if not typical:
            total += px * fid(rho_x, rho_err)
            continue
        shells = {}
        for y in ys:
            key = tuple(map(tuple, joint(x, y, 2, 3)))
            shells.setdefault(key, []).append(y)
        bob = np.zeros_like(rho_err)
        err = 1.0
        for key, members in shells.items():
            mass = sum(seq_prob(x, y, w) for y in members)
            if mass == 0 or not cond_typical(list(x), list(members[0]), w, dp):
                continue
            ytype = [members[0].count(b) for b in range(3)]
            cls = math.factorial(n) // math.prod(math.factorial(c) for c in ytype)
            pe = (1 - len(members) / cls) ** n_l
            bob += mass * (1 - pe) / len(members) * sum(np.outer(kets[y], kets[y]) for y in members)
            err -= mass * (1 - pe)
        bob += err * rho_err
        total += px * fid(rho_x, bob)
    return total


def two_coins_expected_fidelity(n, w, rate):
    """Log-domain sum over x-types and shells for the commuting two-coins case."""
    lw = [[math.log(1 - w), math.log(w)], [math.log(w), math.log(1 - w)]]
    delta = dp = n ** (-1 / 3)
    n_l = math.floor(2 ** (n * rate))
    lf = [math.lgamma(k + 1) for k in range(n + 1)]
    total = 0.0
    for k0 in range(n + 1):
        k1 = n - k0
        log_ptype = lf[n] - lf[k0] - lf[k1] - n * math.log(2)
        typical = abs(k0 / n - 0.5) <= delta + 1e-12
        shells = []
        for a in range(k0 + 1):
            for b in range(k1 + 1):
                m = [[a, k0 - a], [b, k1 - b]]
                log_size = lf[k0] - lf[a] - lf[k0 - a] + lf[k1] - lf[b] - lf[k1 - b]
                log_w = sum(m[i][j] * lw[i][j] for i in range(2) for j in range(2))
                ok = typical and all(
                    abs(m[i][j] / n - (k0, k1)[i] * (1 - w if i == j else w) / n) <= dp + 1e-12
                    for i in range(2) for j in range(2)
                )
                ycount = a + b
                log_cls = lf[n] - lf[ycount] - lf[n - ycount]
                ratio = math.exp(log_size - log_cls)
                # keep 1 - p_e accurate when p_e is close to 1
                keep = 1.0 if ratio >= 1 else -math.expm1(n_l * math.log1p(-ratio))
                shells.append((log_size, log_w, ok, keep))
        err = 1.0 - sum(math.exp(s + lw_) * keep for s, lw_, ok, keep in shells if ok)
        err = max(err, 0.0)
        log_err_seq = (math.log(err) if err > 0 else -math.inf) - n * math.log(2)
        terms = []
        for s, lw_, ok, keep in shells:
            q = (math.exp(lw_) * keep if ok else 0.0) + math.exp(log_err_seq)
            if q > 0:
                terms.append(s + 0.5 * (lw_ + math.log(q)))
        mx = max(terms)
        log_sqrt_f = mx + math.log(sum(math.exp(t - mx) for t in terms))
        total += math.exp(log_ptype + 2 * log_sqrt_f)
    return total


def derive():
    out = {}
    out["trine"] = trine_holevo()
    bsc = [[0.9, 0.1], [0.1, 0.9]]
    out["cond_mass_bsc_5_5"] = cond_mass_brute((0,) * 5 + (1,) * 5, bsc, 0.3)
    out["cond_mass_trine_n6"] = cond_mass_brute((0, 0, 0, 1, 1, 1), TRINE_W, 0.25)
    out["typical_mass_half_n100"] = binom_typical_mass(100, 0.1)
    out["trine_n4_fidelity"] = {
        "R=0.2": trine_expected_fidelity(4, 0.2),
        "R=I+0.3": trine_expected_fidelity(4, 2 / 3 + 0.3),
    }
    i_bsc = 1 - float(h_mp(0.1))
    out["two_coins_n200_fidelity"] = {
        "R=I+0.2": two_coins_expected_fidelity(200, 0.1, i_bsc + 0.2),
        "R=I-0.2": two_coins_expected_fidelity(200, 0.1, i_bsc - 0.2),
    }
    return out


def _close(a, b, rel=1e-9):
    if isinstance(a, dict):
        return all(_close(a[k], b[k], rel) for k in a)
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args()
    values = derive()
    if args.check:
        frozen = json.loads(FROZEN.read_text())
        print("match" if _close(values, frozen) else "MISMATCH")
    else:
        FROZEN.write_text(json.dumps(values, indent=2, sort_keys=True) + "\n")
        print(json.dumps(values, indent=2, sort_keys=True))
