"""Normal form engine: homological solves, Lie transforms, iteration.

A step eliminates the working part of the perturbation through the time-1
flow of a polynomial generator chi.  Divisors under gamma/N^alpha are kept
(resonant), the rest is divided out; tail-cubic terms are never normalized,
only transported, and every majorant pushed aside on the way is ledgered.

Degree indexing is 1-based on the generator list: chi_r is homogeneous of
degree r+2 for r = 1..r_star, so the first generator removes cubics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .fields import eta_gradient_table
from .modes import as_mode, mode_str
from .norms import majorant_norm
from .poly import (Monomial, Polynomial, poisson_bracket, quadratic_diagonal,
                   zero)
from .resonance import normal_form_membership
from .spectra import FrequencyTable

DEGREE_BY_DEGREE = "degree_by_degree"
BLOCK = "block"


# -- parameter formulas --------------------------------------------------


def nstar(r: int, alpha: float, R: float) -> int:
    """Tail cutoff N_* = floor(R^(-1/(2 r alpha)))."""
    if r < 1 or alpha <= 0 or R <= 0:
        raise ValueError("nstar: positive arguments required")
    return math.floor(R ** (-1.0 / (2.0 * r * alpha)))


def sstar(r: int, alpha: float) -> float:
    """Smallest admissible Sobolev weight s_* = 2 alpha r^2 + 2."""
    if r < 1 or alpha <= 0:
        raise ValueError("sstar: positive arguments required")
    return 2.0 * alpha * r * r + 2.0


def rstar_radius(gamma: float, r_star: int, N: int, alpha: float,
                 A: float) -> float:
    """Trust radius R_* = gamma / (24 e r_star N^alpha A)."""
    if gamma <= 0 or r_star < 1 or N < 1 or alpha <= 0 or A <= 0:
        raise ValueError("rstar_radius: positive arguments required")
    return gamma / (24.0 * math.e * r_star * N ** alpha * A)


def fit_A(P: Polynomial, s: float, radii: Sequence[float] = (0.25, 0.5, 1.0)
          ) -> float:
    """Smallest A with majorant(P, s, R) <= A R^2 over the probe radii."""
    return max(majorant_norm(P, s, R) / (R * R) for R in radii)


# -- parameters and result records ---------------------------------------


AUTO = "auto"


@dataclass
class NormalFormParams:
    r_star: int
    gamma: float
    alpha: float
    N: object = AUTO
    s: float = 2.0
    mode: str = DEGREE_BY_DEGREE

    def __post_init__(self):
        if self.r_star < 1:
            raise ValueError("r_star: must be >= 1")
        if not self.gamma > 0:
            raise ValueError("gamma: must be > 0")
        if not self.alpha > 0:
            raise ValueError("alpha: must be > 0")
        if self.mode not in (DEGREE_BY_DEGREE, BLOCK):
            raise ValueError("mode: must be degree_by_degree or block")
        if self.N != AUTO and (not isinstance(self.N, int) or self.N < 1):
            raise ValueError("N: must be a positive integer or 'auto'")

    @property
    def degree_cap(self) -> int:
        return self.r_star + 2

    @property
    def threshold(self) -> float:
        if self.N == AUTO:
            raise ValueError("N: unresolved")
        return self.gamma / self.N ** self.alpha

    def resolved(self, amplitude: Optional[float] = None
                 ) -> "NormalFormParams":
        """Concrete N; AUTO uses N_* at R = 8 * amplitude and checks s."""
        if self.N != AUTO:
            return self
        if amplitude is None or amplitude <= 0:
            raise ValueError("N: auto resolution needs a positive amplitude")
        smin = sstar(self.r_star, self.alpha)
        if self.s < smin:
            raise ValueError("s: %g below s_* = %g" % (self.s, smin))
        n = max(1, nstar(self.r_star, self.alpha, 8.0 * amplitude))
        return replace(self, N=n)


@dataclass
class RemainderLedger:
    """Cumulative majorant bookkeeping; every series is nondecreasing."""
    tail_cubic_mass: List[float] = field(default_factory=list)
    overflow_mass: List[float] = field(default_factory=list)
    chi_majorants: List[float] = field(default_factory=list)

    def check(self) -> bool:
        for seq in (self.tail_cubic_mass, self.overflow_mass):
            if any(x < 0 for x in seq):
                return False
            if any(b < a for a, b in zip(seq, seq[1:])):
                return False
        return all(x >= 0 for x in self.chi_majorants)


def term_key(mono: Monomial) -> str:
    xi_s = " ".join("%s:%d" % (mode_str(m), e) for m, e in mono.xi)
    eta_s = " ".join("%s:%d" % (mode_str(m), e) for m, e in mono.eta)
    return xi_s + "|" + eta_s


@dataclass
class NormalFormResult:
    Z: Polynomial
    generators: List[Polynomial]
    f_final: Polynomial
    remainder_tail: Polynomial
    ledger: RemainderLedger
    params: NormalFormParams
    membership: Dict[str, bool]

    def membership_ok(self) -> bool:
        return all(self.membership.values())


# -- the homological step ------------------------------------------------


def solve_homological(f: Polynomial, omega: FrequencyTable, gamma: float,
                      alpha: float, N: int) -> Tuple[Polynomial, Polynomial]:
    """Split f into {H0, chi} + Z coefficientwise.

    Terms with |omega.(k-l)| <= gamma/N^alpha go to Z untouched (the
    boundary counts as resonant: never divide by the minimal divisor);
    the rest are divided by i omega.(k-l).  Every input term must carry
    tail degree <= 2, and the identity {H0, chi} + Z = f is rechecked by
    an actual bracket to 1e-12 relative.
    """
    thr = gamma / N ** alpha
    chi_t, z_t = {}, {}
    for mono, c in f.items():
        if mono.tail_degree(N) > 2:
            raise ValueError("tail degree > 2 in homological input: %r"
                             % mono)
        net: Dict[tuple, int] = {}
        for m, e in mono.xi:
            net[m] = net.get(m, 0) + e
        for m, e in mono.eta:
            net[m] = net.get(m, 0) - e
        div = math.fsum(omega.omega_of(m) * k for m, k in net.items() if k)
        if abs(div) <= thr:
            z_t[mono] = c
        else:
            chi_t[mono] = complex(c) / (1j * div)
    chi = Polynomial(chi_t, f.degree_cap)
    z = Polynomial(z_t, f.degree_cap)
    support = set()
    for mono in f.terms:
        support |= mono.modes()
    h0 = quadratic_diagonal({m: omega.omega_of(m) for m in support})
    residual = (poisson_bracket(h0, chi) + z - f).l1()
    if residual > 1e-12 * max(f.l1(), 1e-300):
        raise ArithmeticError("homological residual %.3e exceeds tolerance"
                              % residual)
    return chi, z


def lie_transform(g: Polynomial, chi: Polynomial,
                  degree_cap: Optional[int]) -> Polynomial:
    """Sum of g_l with g_0 = g and g_l = (1/l){chi, g_{l-1}} under the cap.

    chi must have minimum degree >= 3 so each bracket raises the minimum
    degree and the series terminates; overflow mass is logged on the
    result.
    """
    if not chi:
        return g.truncate_above(degree_cap) if degree_cap is not None else g
    if chi.min_degree() <= 2:
        raise ValueError("chi: minimum degree must be >= 3")
    total = g.truncate_above(degree_cap) if degree_cap is not None else g
    # series terms are stripped of operand history so only fresh overflow
    # is metered; the bracket propagates operand drops into its result
    chi0 = Polynomial(chi.terms, chi.degree_cap)
    term = Polynomial(total.terms, total.degree_cap)
    fresh = 0.0
    l = 1
    while term:
        term = poisson_bracket(chi0, term).scale(1.0 / l)
        if degree_cap is not None:
            term = term.truncate_above(degree_cap)
        fresh += term.dropped
        term = Polynomial(term.terms, term.degree_cap)
        total = total + term
        l += 1
        if l > 400:
            raise ArithmeticError("lie series failed to terminate")
    return Polynomial(total.terms, total.degree_cap, total.dropped + fresh)


def lie_compose(g: Polynomial, generators: Sequence[Polynomial],
                degree_cap: Optional[int]) -> Polynomial:
    """g composed with the time-1 flows of the generators, in order."""
    for chi in generators:
        g = lie_transform(g, chi, degree_cap)
    return g


# -- the normalization loop ----------------------------------------------


def normalize(h0_freqs: FrequencyTable, P: Polynomial,
              params: NormalFormParams,
              amplitude: Optional[float] = None) -> NormalFormResult:
    """Iteratively push P into resonant-only shape.

    Per round r = 1..r_star: tail-split the carry at N, solve the
    homological equation for the working part (the homogeneous degree-(r+2)
    slice by default, the whole low part in block mode), then transport the
    core Hamiltonian and the tail-cubic remainder through the generator
    flow.  The carry is whatever the identity {H0,chi}+Z = f left over.
    """
    params = params.resolved(amplitude)
    N = params.N
    cap = params.degree_cap
    if P and P.min_degree() < 3:
        raise ValueError("P: minimum degree must be >= 3")
    h0 = quadratic_diagonal({m: h0_freqs.omega_of(m)
                             for m in h0_freqs.modes()})
    zero_mom = P.is_zero_momentum()
    g = P.truncate_above(cap)
    z = zero(cap)
    rn = zero(cap)
    gens: List[Polynomial] = []
    ledger = RemainderLedger()
    tail_cum = 0.0
    overflow_cum = 0.0
    for r in range(params.r_star):
        split = g.tail_split(N)
        low, high = split.low, split.high
        tail_cum += majorant_norm(high, params.s, 1.0)
        if params.mode == DEGREE_BY_DEGREE:
            working = low.homogeneous_part(r + 3)
        else:
            working = low
        chi, z_r = solve_homological(working, h0_freqs, params.gamma,
                                     params.alpha, N)
        gens.append(chi)
        core = lie_transform(h0 + z + low, chi, cap)
        rn = lie_transform(rn + high, chi, cap)
        z = z + z_r
        # operands above fed the transform with zero logged mass, so
        # core.dropped is exactly this step's overflow; rn keeps its own
        overflow_cum += core.dropped
        g = core - h0 - z
        ledger.chi_majorants.append(majorant_norm(chi, params.s, 1.0))
        ledger.tail_cubic_mass.append(tail_cum)
        ledger.overflow_mass.append(overflow_cum + rn.dropped)

    membership = {term_key(m): normal_form_membership(
        m, h0_freqs, params.gamma, params.alpha, N) for m in z.terms}
    if not all(membership.values()):
        raise ArithmeticError("normal form term failed membership")
    if params.mode == DEGREE_BY_DEGREE:
        for i, chi in enumerate(gens):
            if chi and not chi.min_degree() == chi.max_degree() == i + 3:
                raise ArithmeticError("generator %d not homogeneous" % (i + 1))
    if z and not (3 <= z.min_degree() and z.max_degree() <= cap):
        raise ArithmeticError("normal form outside degree window")
    if zero_mom and not (z.is_zero_momentum()
                         and all(c.is_zero_momentum() for c in gens)):
        raise ArithmeticError("momentum leak in normalization")
    return NormalFormResult(z, gens, g, rn, ledger, params, membership)


# -- state transport ------------------------------------------------------


def _unit_flow(table, sign: float, x0: np.ndarray, tol: float,
               base_steps: int, max_doublings: int) -> np.ndarray:
    factor = 1j * sign

    def run(n: int) -> np.ndarray:
        h = 1.0 / n
        x = x0.astype(complex)
        for _ in range(n):
            k1 = factor * table.eval(x)
            k2 = factor * table.eval(x + 0.5 * h * k1)
            k3 = factor * table.eval(x + 0.5 * h * k2)
            k4 = factor * table.eval(x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return x

    prev = run(base_steps)
    n = 2 * base_steps
    for _ in range(max_doublings):
        cur = run(n)
        err = float(np.max(np.abs(cur - prev))) if len(cur) else 0.0
        scale = 1.0 + float(np.max(np.abs(cur))) if len(cur) else 1.0
        if err <= tol * scale:
            return cur
        prev = cur
        n *= 2
    raise ArithmeticError("generator flow did not converge to %g" % tol)


@dataclass
class TransportPlan:
    """Precompiled generator-flow tables over a fixed mode layout.

    Worth building once when many points travel through the same flows,
    e.g. one transform per trajectory frame.
    """
    layout: List[tuple]
    steps: List[object]
    sign: float
    tol: float
    base_steps: int
    max_doublings: int

    def vector(self, state: dict) -> np.ndarray:
        z = {as_mode(m): complex(v) for m, v in state.items()}
        return np.array([z.get(m, 0.0) for m in self.layout], dtype=complex)


def transport_plan(generators: Sequence[Polynomial], modes,
                   direction: str = "forward", tol: float = 1e-12,
                   base_steps: int = 64, max_doublings: int = 7
                   ) -> TransportPlan:
    if direction not in ("forward", "inverse"):
        raise ValueError("direction: forward or inverse")
    all_modes = {as_mode(m) for m in modes}
    for chi in generators:
        for mono in chi.terms:
            all_modes |= mono.modes()
    layout = sorted(all_modes)
    if direction == "forward":
        seq, sign = list(reversed(generators)), 1.0
    else:
        seq, sign = list(generators), -1.0
    steps = [eta_gradient_table(chi, layout) for chi in seq if chi]
    return TransportPlan(layout, steps, sign, tol, base_steps, max_doublings)


def apply_transport(plan: TransportPlan, x: np.ndarray) -> np.ndarray:
    for table in plan.steps:
        x = _unit_flow(table, plan.sign, x, plan.tol, plan.base_steps,
                       plan.max_doublings)
    return x


def transform_state(state: dict, generators: Sequence[Polynomial],
                    direction: str = "forward", tol: float = 1e-12,
                    base_steps: int = 64, max_doublings: int = 7) -> dict:
    """Transport a phase point through the time-1 generator flows.

    The function-level transform applies the generators in list order, so
    points travel through the flows in reverse order; the inverse negates
    the generators and undoes them first-to-last.  eta = conj(xi) is
    preserved because the generators are real-valued.
    """
    plan = transport_plan(generators, [as_mode(m) for m in state],
                          direction, tol, base_steps, max_doublings)
    x = apply_transport(plan, plan.vector(state))
    return {m: complex(v) for m, v in zip(plan.layout, x)}
