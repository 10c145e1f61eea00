"""Majorant norms and empirical tame-norm estimates for polynomials.

The majorant norm is a cheap coefficientwise upper bound for the tame
operator norm of the modulus vector field of a polynomial: per homogeneous
degree-r part,

    nu_s(f_r) = sum over terms  |c| * max_v  e_v * sqrt(
                    w_s(mode(v)) / (w_s(m) * prod_{j in rest} w_1(j)) )

where v runs over the variable slots of the term (e_v its exponent),
m over the remaining occurrences, and `rest` is the occurrence multiset
with v's output slot and m removed.  The exponent factor e_v accounts for
the derivative multiplicity; on single-mode monomials the bound is exact
(xi_1^r has tame norm r / w_1(1)^((r-2)/2), reproduced by nu_s).

Then  majorant_norm(f, s, R) = sum_r nu_s(f_r) R^(r-1).

`sampled_tame_ratio` estimates the same operator norm from below by Monte
Carlo over positive multivectors; `nu_s >= sampled_tame_ratio` is enforced
by the test corpus before the surrogate is considered calibrated, and the
bracket inequality

    majorant_norm({f,g}, s, R-d) <= (1/d) majorant_norm(f,s,R) majorant_norm(g,s,R)

is checked there as well.  TAME_CAL is the calibration constant; it stays
at 1.0 unless the corpus forces a bump.
"""
from __future__ import annotations

import itertools
import math
from typing import Dict, Iterable, List, Tuple

import numpy as np

from .modes import weight
from .poly import Monomial, Polynomial

TAME_CAL = 1.0


def _occurrences(mono: Monomial) -> list:
    """Variable slots of a monomial: (kind, mode, exponent) triples."""
    out = [("xi", m, e) for m, e in mono.xi]
    out += [("eta", m, e) for m, e in mono.eta]
    return out


def nu_term(mono: Monomial, s: float) -> float:
    """Per-term majorant factor (coefficient excluded)."""
    slots = _occurrences(mono)
    r = mono.degree
    if r == 0:
        return 0.0
    if r == 1:
        return math.sqrt(weight(slots[0][1], s))
    # occurrence multiset of modes, with multiplicity
    occ: List = []
    for _, m, e in slots:
        occ.extend([m] * e)
    best = 0.0
    for kind, mode_v, e_v in slots:
        rest0 = list(occ)
        rest0.remove(mode_v)  # output slot uses one occurrence of mode_v
        w_out = weight(mode_v, s)
        for idx in range(len(rest0)):
            m = rest0[idx]
            denom = weight(m, s)
            for jdx, mj in enumerate(rest0):
                if jdx != idx:
                    denom *= weight(mj, 1.0)
            val = e_v * math.sqrt(w_out / denom)
            if val > best:
                best = val
    return best * TAME_CAL


def nu_homogeneous(f_r: Polynomial, s: float) -> float:
    """nu_s of a homogeneous polynomial (sum of per-term contributions)."""
    return math.fsum(abs(c) * nu_term(m, s) for m, c in f_r.items())


def majorant_norm(f: Polynomial, s: float, radius: float) -> float:
    """Coefficientwise majorant of the tame norm at radius R.

    Sums nu_s(f_r) * R^(r-1) over the homogeneous parts f_r.
    """
    by_deg: Dict[int, float] = {}
    for m, c in f.items():
        by_deg[m.degree] = by_deg.get(m.degree, 0.0) + abs(c) * nu_term(m, s)
    return math.fsum(v * radius ** (r - 1) for r, v in by_deg.items())


# -- sampled tame ratio ------------------------------------------------


def _field_entries(f: Polynomial):
    """Modulus-field entries: (output_mode, |coeff|*exp, remaining slots)."""
    entries = []
    for mono, c in f.items():
        a = abs(c)
        for kind, m, e in _occurrences(mono):
            rest = []
            for kind2, m2, e2 in _occurrences(mono):
                n = e2 - 1 if (kind2, m2) == (kind, m) else e2
                rest.extend([(kind2, m2)] * n)
            entries.append((m, a * e, tuple(rest)))
    return entries


def _sym_eval(rest, vectors) -> float:
    """Symmetrized multilinear evaluation: permanent average over slots."""
    n = len(rest)
    if n == 0:
        return 1.0
    tot = 0.0
    for perm in itertools.permutations(range(n)):
        p = 1.0
        for t, i in enumerate(perm):
            p *= vectors[i][rest[t]]
        tot += p
    return tot / math.factorial(n)


def _vec_norm(vec: dict, s: float) -> float:
    acc: Dict[tuple, float] = {}
    for (kind, m), v in vec.items():
        acc[m] = acc.get(m, 0.0) + v * v
    return math.sqrt(math.fsum(weight(m, s) * v for m, v in acc.items()))


def sampled_tame_ratio(f: Polynomial, s: float, samples: int = 200, seed: int = 0) -> float:
    """Monte Carlo lower estimate of the tame norm of the modulus field.

    f must be homogeneous of degree >= 2.  Draws positive random
    multivectors supported on the variables of f, evaluates the
    symmetrized modulus vector field on them and returns the running
    maximum of ||X(z^1..z^{r-1})||_s / ||(z^1..z^{r-1})||_{s,1}.
    Deterministic for a fixed seed; more samples can only increase it.
    """
    degs = f.degrees()
    if len(degs) != 1:
        raise ValueError("sampled_tame_ratio needs a homogeneous polynomial")
    r = degs[0]
    if r < 2:
        raise ValueError("degree must be >= 2")
    nvec = r - 1
    entries = _field_entries(f)
    slots = sorted({sl for _, _, rest in entries for sl in rest})
    if not slots:
        return 0.0
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        vectors = []
        for _ in range(nvec):
            vals = rng.uniform(0.0, 1.0, size=len(slots))
            vectors.append({sl: float(v) for sl, v in zip(slots, vals)})
        comp: Dict[tuple, float] = {}
        for out_mode, a, rest in entries:
            v = a * _sym_eval(rest, vectors)
            comp[out_mode] = comp.get(out_mode, 0.0) + v
        num = math.sqrt(math.fsum(weight(m, s) * v * v for m, v in comp.items()))
        den = 0.0
        norms_1 = [_vec_norm(v, 1.0) for v in vectors]
        norms_s = [_vec_norm(v, s) for v in vectors]
        for l in range(nvec):
            p = norms_s[l]
            for t in range(nvec):
                if t != l:
                    p *= norms_1[t]
            den += p
        den /= nvec
        if den > 0:
            best = max(best, num / den)
    return best
