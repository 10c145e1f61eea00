"""Near-resonance enumeration and exceptional-pattern classification.

A frequency table and a screening threshold gamma/N^alpha split integer
combinations omega.k into small divisors (kept in the normal form) and safe
ones (eliminated).  This module enumerates the small combinations under the
order and tail constraints, classifies the structured patterns that survive
in the paired and lattice-shell models, and Monte Carlo-estimates the measure
of the violating potential set over the random ensembles.

Divisor decisions use exactly-rounded summation throughout: near the
threshold a naive left-to-right sum misclassifies at this scale.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .modes import Mode, as_mode, lattice_modes, mode_abs2, mode_str
from .poly import Monomial
from .spectra import (FrequencyTable, PotentialSample, SpectralError,
                      convolution_frequencies, periodic_nlw_table,
                      sample_potential, sturm_liouville)

PATTERN_NONE = "NONE"
PATTERN_PAIR_TAIL = "PAIR_TAIL"
PATTERN_SHELL = "SHELL"

Z95 = 1.959963984540054  # two-sided 95% normal quantile

DEFAULT_NODE_CAP = 2_000_000


def omega_dot(omega: FrequencyTable, k) -> float:
    """Signed omega.k by exactly-rounded summation."""
    items = k.items() if isinstance(k, dict) else k
    return math.fsum(omega.omega_of(j) * int(c) for j, c in items if c)


def small_divisor(omega: FrequencyTable, k) -> float:
    """|omega.k|; raises KeyError on modes outside the table."""
    return abs(omega_dot(omega, k))


@dataclass
class DivisorQuery:
    """Enumeration request: order |k| <= r+2, tail mass <= 2 beyond N."""
    omega: Optional[FrequencyTable]
    r: int
    N: int
    gamma: float
    alpha: float
    jmax: float
    node_cap: int = DEFAULT_NODE_CAP

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma: must be > 0")
        if not self.alpha > 0:
            raise ValueError("alpha: must be > 0")
        if self.N < 1:
            raise ValueError("N: must be >= 1")
        if self.r < 1:
            raise ValueError("r: must be >= 1")
        if self.jmax < self.N:
            raise ValueError("jmax: must be >= N")
        if self.node_cap < 1:
            raise ValueError("node_cap: must be >= 1")

    @property
    def threshold(self) -> float:
        return self.gamma / self.N ** self.alpha


@dataclass
class ResonanceHit:
    k: Dict[Mode, int]
    value: float
    pattern: str = PATTERN_NONE

    def key(self) -> tuple:
        return tuple(sorted((j, c) for j, c in self.k.items() if c))

    def order(self) -> int:
        return sum(abs(c) for c in self.k.values())

    def serialize(self) -> str:
        return " ".join("%s:%d" % (mode_str(j), c) for j, c in self.key())


@dataclass
class EnumerationResult:
    hits: List[ResonanceHit]
    complete: bool
    nodes: int
    threshold: float = 0.0

    def keys(self) -> set:
        return {h.key() for h in self.hits}


def _domain(q: DivisorQuery) -> Tuple[list, list, list]:
    """Modes within |j| <= jmax with frequencies and tail flags."""
    if q.omega is None:
        raise ValueError("omega: required for enumeration")
    j2 = q.jmax * q.jmax
    n2 = q.N * q.N
    modes = [m for m in q.omega.modes() if mode_abs2(m) <= j2]
    w = [q.omega.omega_of(m) for m in modes]
    tail = [mode_abs2(m) > n2 for m in modes]
    return modes, w, tail


def _dfs(w_lo: Sequence[float], w_hi: Sequence[float], is_tail: Sequence[bool],
         order: int, tail_budget: int, threshold: float, node_cap: int,
         emit) -> Tuple[bool, int]:
    """Depth-first search over exponent vectors with interval pruning.

    Each frequency lies in [w_lo[i], w_hi[i]] (point queries pass equal
    endpoints).  A branch is cut when no completion within the remaining
    order budget can bring |sum| under the threshold.  emit(assign) is
    called at every admissible leaf; the exact accept test is the caller's.
    """
    n = len(w_lo)
    sufmax = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        sufmax[i] = max(sufmax[i + 1], abs(w_lo[i]), abs(w_hi[i]))
    # prune with slack: partial sums round; leaves are rechecked exactly
    margin = 1e-9 * (1.0 + threshold + order * sufmax[0])
    assign = [0] * n
    state = [0, True]  # nodes, complete

    def rec(i: int, m: int, tb: int, s_lo: float, s_hi: float) -> None:
        state[0] += 1
        if state[0] > node_cap:
            state[1] = False
            return
        reach = m * sufmax[i]
        lo, hi = s_lo - reach, s_hi + reach
        mindiv = lo if lo > 0.0 else (-hi if hi < 0.0 else 0.0)
        if mindiv > threshold + margin:
            return
        if i == n:
            emit(assign)
            return
        cap = min(m, tb) if is_tail[i] else m
        wl, wh = w_lo[i], w_hi[i]
        for e in range(-cap, cap + 1):
            if e == 0:
                lo2, hi2 = s_lo, s_hi
            elif e > 0:
                lo2, hi2 = s_lo + e * wl, s_hi + e * wh
            else:
                lo2, hi2 = s_lo + e * wh, s_hi + e * wl
            assign[i] = e
            rec(i + 1, m - abs(e), tb - (abs(e) if is_tail[i] else 0),
                lo2, hi2)
            if not state[1]:
                break
        assign[i] = 0

    rec(0, order, tail_budget, 0.0, 0.0)
    return state[1], state[0]


def enumerate_near_resonances(q: DivisorQuery) -> EnumerationResult:
    """All k with 0 < |k| <= r+2, tail mass <= 2, |omega.k| < gamma/N^alpha.

    Branch-and-bound over frequencies sorted by size; the returned list is
    canonically sorted, so it does not depend on the search order.  A node
    budget overrun is reported through the complete flag, never silently.
    """
    modes, w, tail = _domain(q)
    idx = sorted(range(len(modes)), key=lambda i: (-abs(w[i]), modes[i]))
    modes = [modes[i] for i in idx]
    w = [w[i] for i in idx]
    tail = [tail[i] for i in idx]
    thr = q.threshold
    hits: List[ResonanceHit] = []

    def emit(assign):
        pairs = [(modes[i], e) for i, e in enumerate(assign) if e]
        if not pairs:
            return
        value = math.fsum(q.omega.omega_of(j) * e for j, e in pairs)
        if abs(value) < thr:
            hits.append(ResonanceHit(dict(pairs), value))

    complete, nodes = _dfs(w, w, tail, q.r + 2, 2, thr, q.node_cap, emit)
    hits.sort(key=ResonanceHit.key)
    return EnumerationResult(hits, complete, nodes, thr)


def enumerate_brute_force(q: DivisorQuery, box_cap: int = 40_000_000
                          ) -> EnumerationResult:
    """Exhaustive reference enumeration over the full exponent box.

    Only the defining constraints are applied, so this shares no pruning
    logic with the branch-and-bound search; intended as a test oracle on
    small domains.
    """
    modes, w, tail = _domain(q)
    n = len(modes)
    R = q.r + 2
    width = 2 * R + 1
    if width ** n > box_cap:
        raise ValueError("brute-force box %d^%d exceeds cap" % (width, n))
    grids = np.meshgrid(*([np.arange(-R, R + 1)] * n), indexing="ij")
    K = np.stack([g.ravel() for g in grids], axis=1)
    a = np.abs(K)
    order = a.sum(axis=1)
    keep = (order > 0) & (order <= R)
    tcols = [i for i in range(n) if tail[i]]
    if tcols:
        keep &= a[:, tcols].sum(axis=1) <= 2
    K = K[keep]
    wv = np.asarray(w)
    div = K @ wv
    thr = q.threshold
    # wide pre-filter, then exactly-rounded recheck on the borderline
    slack = 64 * np.finfo(float).eps * R * (np.max(np.abs(wv)) if n else 0.0)
    near = np.abs(div) < thr + slack
    hits = []
    for row in K[near]:
        pairs = [(modes[i], int(row[i])) for i in range(n) if row[i]]
        value = math.fsum(q.omega.omega_of(j) * e for j, e in pairs)
        if abs(value) < thr:
            hits.append(ResonanceHit(dict(pairs), value))
    hits.sort(key=ResonanceHit.key)
    return EnumerationResult(hits, True, int(K.shape[0]), thr)


# -- exceptional patterns ------------------------------------------------


def _neg(mode: Mode) -> Mode:
    return tuple(-c for c in mode)


def _pair_pattern(k: Dict[Mode, int], cutoff: float) -> bool:
    """k_j = 0 below the cutoff and k_j + k_{-j} = 0 beyond it."""
    c2 = cutoff * cutoff
    for j, e in k.items():
        if not e:
            continue
        if mode_abs2(j) <= c2:
            return False
        if e + k.get(_neg(j), 0) != 0:
            return False
    return True


def _shell_pattern(k: Dict[Mode, int], cutoff: float) -> bool:
    """k_j = 0 below the cutoff, zero sum on every squared-modulus shell."""
    c2 = cutoff * cutoff
    shells: Dict[int, int] = defaultdict(int)
    for j, e in k.items():
        if not e:
            continue
        a2 = mode_abs2(j)
        if a2 <= c2:
            return False
        shells[a2] += e
    return all(v == 0 for v in shells.values())


def classify_exception(hit, model: str, params: dict) -> str:
    """Pattern tag for a hit under a model's exceptional-resonance rule.

    nlw_periodic: pair cancellation beyond b*ln(N).
    nls_coupled:  pair cancellation beyond C*N^sqrt(2*alpha).
    pair:         pair cancellation beyond an explicit cutoff (default 0).
    nls_dd / convolution_d / shell: zero shell sums beyond N^sqrt(alpha/m).
    """
    k = dict(hit.k) if isinstance(hit, ResonanceHit) else dict(hit)
    tag = model.lower()
    if tag in ("nlw_periodic", "nls_coupled", "pair"):
        if tag == "nlw_periodic":
            cutoff = params["b"] * math.log(params["N"])
        elif tag == "nls_coupled":
            cutoff = params.get("C", 1.0) * params["N"] ** math.sqrt(
                2.0 * params["alpha"])
        else:
            cutoff = params.get("cutoff", 0.0)
        return PATTERN_PAIR_TAIL if _pair_pattern(k, cutoff) else PATTERN_NONE
    if tag in ("nls_dd", "convolution_d", "shell"):
        m = params.get("m_decay", params.get("decay"))
        if m is None:
            raise ValueError("m_decay: required for shell classification")
        cutoff = params["N"] ** math.sqrt(params["alpha"] / m)
        return PATTERN_SHELL if _shell_pattern(k, cutoff) else PATTERN_NONE
    raise ValueError("unknown model tag %r" % model)


@dataclass
class PairCalibration:
    b: float
    j_cutoff: int
    gap_threshold: float
    worst_gap_beyond: float


def calibrate_pair_cutoff(table: FrequencyTable, gamma: float, alpha: float,
                          N: int) -> PairCalibration:
    """Smallest b with |omega_j - omega_{-j}| < gamma/(2 N^alpha) past b*lnN.

    Scans the pairs present in the (finite) table; modes beyond it are out
    of the model by construction.
    """
    thr = gamma / (2.0 * N ** alpha)
    gaps = {}
    for m in table.omega:
        n = m[0]
        if len(m) == 1 and n > 0 and (-n,) in table.omega:
            gaps[n] = abs(table.omega[m] - table.omega[(-n,)])
    j_cut = 0
    for n in sorted(gaps):
        if gaps[n] >= thr:
            j_cut = n
    beyond = [g for n, g in gaps.items() if n > j_cut]
    worst = max(beyond) if beyond else 0.0
    if j_cut == 0:
        b = 0.0
    elif N > 1:
        b = j_cut / math.log(N)
    else:
        raise ValueError("N: cannot place a b*ln(N) cutoff at N=1 "
                         "with near-degeneracy failing at j=%d" % j_cut)
    return PairCalibration(b, j_cut, thr, worst)


def normal_form_membership(mono: Monomial, omega: FrequencyTable,
                           gamma: float, alpha: float, N: int) -> bool:
    """Small divisor within threshold and at most two tail exponents.

    The boundary |omega.(k-l)| == gamma/N^alpha counts as a member: the
    normalization keeps boundary terms rather than dividing by a minimal
    divisor, and membership has to agree with that split.
    """
    net: Dict[Mode, int] = {}
    for j, e in mono.xi:
        net[j] = net.get(j, 0) + e
    for j, e in mono.eta:
        net[j] = net.get(j, 0) - e
    div = abs(math.fsum(omega.omega_of(j) * c for j, c in net.items() if c))
    return div <= gamma / N ** alpha and mono.tail_degree(N) <= 2


# -- Monte Carlo measure of the violating set ----------------------------


@dataclass
class MeasureEstimate:
    gamma: float
    threshold: float
    samples: int
    skipped: int
    violations: int
    fraction: float
    wilson_low: float
    wilson_high: float
    half_width: float
    pattern_histogram: Dict[str, int] = field(default_factory=dict)
    complete: bool = True


def wilson_interval(v: int, n: int) -> Tuple[float, float, float]:
    if n <= 0:
        return 0.0, 1.0, 0.5
    p = v / n
    z2 = Z95 * Z95
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    hw = Z95 * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    return center - hw, center + hw, hw


def sample_seeds(seed: int, samples: int) -> List[int]:
    """Named per-sample sub-streams of a single master seed."""
    return [int(np.random.SeedSequence(entropy=seed, spawn_key=(i,))
                .generate_state(1)[0]) for i in range(samples)]


def _classify_for_family(k: Dict[Mode, int], family: str, params: dict,
                         q: DivisorQuery, table: Optional[FrequencyTable],
                         gamma: float) -> str:
    f = family.lower()
    if f == "convolution_d":
        tag = classify_exception(k, "shell", {
            "N": q.N, "alpha": q.alpha,
            "m_decay": params.get("decay", params.get("m_decay"))})
        if tag != PATTERN_NONE:
            return tag
        # the real-symmetric coefficient slice makes omega_k = omega_{-k}
        # exactly, so pure pair cancellations are degenerate by
        # construction and exempted at any index
        return classify_exception(k, "pair", {"cutoff": 0.0})
    if f == "nlw_periodic":
        b = params.get("b")
        if b is None:
            b = calibrate_pair_cutoff(table, gamma, q.alpha, q.N).b
        return classify_exception(k, "nlw_periodic", {"b": b, "N": q.N})
    return PATTERN_NONE


def _family_table(family: str, sample: PotentialSample,
                  q: DivisorQuery) -> FrequencyTable:
    f = family.lower()
    if f == "convolution_d":
        return convolution_frequencies(sample.params.get("d", 1), sample,
                                       q.jmax)
    if f == "nlw_periodic":
        return periodic_nlw_table(sample, int(q.jmax))[0]
    if f == "nls_cosine":
        res = sturm_liouville(sample, "dirichlet", int(q.jmax))
        om = {(j,): float(res.lams[j - 1]) for j in range(1, int(q.jmax) + 1)}
        return FrequencyTable("nls_dirichlet", om)
    raise ValueError("unknown family %r" % family)


def _convolution_candidates(params: dict, q: DivisorQuery, gamma_max: float
                            ) -> Tuple[list, np.ndarray, bool]:
    """Exponent vectors that can be hits for SOME potential in the ensemble.

    Frequencies are intervals |k|^2 +- envelope(k); one interval search
    covers every sample, after which per-sample divisors are plain dot
    products.
    """
    d = int(params.get("d", 1))
    modes = lattice_modes(d, q.jmax)
    probe = PotentialSample(family="convolution_d", params=params, seed=0,
                            coeffs={}, mass=0.0)
    lo, hi, tail = [], [], []
    n2 = q.N * q.N
    for m in modes:
        base = float(mode_abs2(m))
        env = probe.envelope(m)
        lo.append(base - env)
        hi.append(base + env)
        tail.append(mode_abs2(m) > n2)
    idx = sorted(range(len(modes)),
                 key=lambda i: (-max(abs(lo[i]), abs(hi[i])), modes[i]))
    modes = [modes[i] for i in idx]
    lo = [lo[i] for i in idx]
    hi = [hi[i] for i in idx]
    tail = [tail[i] for i in idx]
    rows: List[list] = []

    def emit(assign):
        if any(assign):
            rows.append(list(assign))

    complete, _ = _dfs(lo, hi, tail, q.r + 2, 2,
                       gamma_max / q.N ** q.alpha, q.node_cap, emit)
    K = np.array(rows, dtype=np.int64) if rows else np.zeros((0, len(modes)),
                                                             dtype=np.int64)
    return modes, K, complete


def measure_scan(family: str, params: dict, q: DivisorQuery,
                 gammas: Sequence[float], samples: int, seed: int
                 ) -> List[MeasureEstimate]:
    """Violation fraction per gamma over one shared set of sampled potentials.

    A sample violates at gamma when it has any hit classified NONE.  Reusing
    the same potentials across the grid makes the fraction exactly
    nonincreasing in gamma.
    """
    if samples < 30:
        raise ValueError("samples: must be >= 30")
    gammas = sorted(gammas, reverse=True)
    seeds = sample_seeds(seed, samples)
    thrs = [g / q.N ** q.alpha for g in gammas]
    violations = [0] * len(gammas)
    hist: List[Dict[str, int]] = [defaultdict(int) for _ in gammas]
    skipped = 0
    complete = True

    if family.lower() == "convolution_d":
        modes, K, complete = _convolution_candidates(params, q, gammas[0])
        patterns = np.array([_classify_for_family(
            {m: int(c) for m, c in zip(modes, row) if c},
            family, params, q, None, gammas[0]) for row in K])
        none_mask = patterns == PATTERN_NONE
        for s in seeds:
            sample = sample_potential("convolution_d", params, s)
            wv = np.array([mode_abs2(m) + sample.coeffs.get(m, 0.0)
                           for m in modes])
            div = K @ wv if len(K) else np.zeros(0)
            # exactly-rounded recheck where the dot product is borderline
            for gi, thr in enumerate(thrs):
                near = np.abs(np.abs(div) - thr) < 1e-10 * (1.0 + thr)
                exact = np.abs(div) < thr
                for ri in np.nonzero(near)[0]:
                    row = K[ri]
                    val = math.fsum(float(wv[i]) * int(row[i])
                                    for i in range(len(modes)) if row[i])
                    exact[ri] = abs(val) < thr
                if np.any(exact & none_mask):
                    violations[gi] += 1
                for p in patterns[exact]:
                    hist[gi][p] += 1
    else:
        for s in seeds:
            sample = sample_potential(family, params, s)
            try:
                table = _family_table(family, sample, q)
            except SpectralError:
                skipped += 1
                continue
            qs = replace(q, omega=table, gamma=gammas[0])
            res = enumerate_near_resonances(qs)
            complete = complete and res.complete
            for gi, thr in enumerate(thrs):
                live = [h for h in res.hits if abs(h.value) < thr]
                bad = False
                for h in live:
                    tag = _classify_for_family(h.k, family, params, q, table,
                                               gammas[gi])
                    hist[gi][tag] += 1
                    bad = bad or tag == PATTERN_NONE
                if bad:
                    violations[gi] += 1

    n_eff = samples - skipped
    out = []
    for gi, g in enumerate(gammas):
        lo, hi, hw = wilson_interval(violations[gi], n_eff)
        out.append(MeasureEstimate(
            gamma=g, threshold=thrs[gi], samples=samples, skipped=skipped,
            violations=violations[gi],
            fraction=violations[gi] / n_eff if n_eff else 0.0,
            wilson_low=lo, wilson_high=hi, half_width=hw,
            pattern_histogram=dict(hist[gi]), complete=complete))
    return out


def measure_estimate(family: str, params: dict, q: DivisorQuery,
                     samples: int, seed: int) -> MeasureEstimate:
    return measure_scan(family, params, q, [q.gamma], samples, seed)[0]


# -- CSV -----------------------------------------------------------------


def _f17(x: float) -> str:
    return "%.17g" % x


def write_hits_csv(result: EnumerationResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k_serialized", "divisor", "pattern"])
        for h in result.hits:
            w.writerow([h.serialize(), _f17(h.value), h.pattern])


def write_measure_csv(estimates: Iterable[MeasureEstimate], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma", "threshold", "samples", "skipped", "violations",
                    "fraction", "wilson_low", "wilson_high", "patterns"])
        for e in estimates:
            pats = ";".join("%s:%d" % (k, v)
                            for k, v in sorted(e.pattern_histogram.items()))
            w.writerow([_f17(e.gamma), _f17(e.threshold), e.samples,
                        e.skipped, e.violations, _f17(e.fraction),
                        _f17(e.wilson_low), _f17(e.wilson_high), pats])
