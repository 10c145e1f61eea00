"""Gather/product tables for fast polynomial evaluation on the real slice.

Dictionary-walking a sparse polynomial at every integrator stage dominates
the cost of a trajectory.  Compiling it once into index tables turns each
evaluation into a numpy gather, a row product and a bincount: the work
vector is G = [xi_0..xi_{n-1}, conj(xi_0)..conj(xi_{n-1}), 1] and every
table row is one term, coefficient times a padded list of indices into G.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from .modes import as_mode
from .poly import Polynomial


@dataclass
class FieldTable:
    """Rows evaluating d(p)/d(eta_m) for every layout mode m at eta=conj(xi)."""
    modes: List[tuple]
    index: Dict[tuple, int]
    vidx: np.ndarray
    coeff: np.ndarray
    out: np.ndarray

    def eval(self, x: np.ndarray) -> np.ndarray:
        n = len(self.modes)
        if not len(self.coeff):
            return np.zeros(n, dtype=complex)
        G = np.empty(2 * n + 1, dtype=complex)
        G[:n] = x
        G[n:2 * n] = np.conj(x)
        G[2 * n] = 1.0
        vals = self.coeff * np.prod(G[self.vidx], axis=1)
        re = np.bincount(self.out, vals.real, minlength=n)
        im = np.bincount(self.out, vals.imag, minlength=n)
        return re + 1j * im


@dataclass
class ValueTable:
    """Rows evaluating p itself at eta = conj(xi)."""
    modes: List[tuple]
    vidx: np.ndarray
    coeff: np.ndarray

    def eval(self, x: np.ndarray) -> complex:
        if not len(self.coeff):
            return 0.0 + 0.0j
        n = len(self.modes)
        G = np.empty(2 * n + 1, dtype=complex)
        G[:n] = x
        G[n:2 * n] = np.conj(x)
        G[2 * n] = 1.0
        return complex(np.sum(self.coeff * np.prod(G[self.vidx], axis=1)))


def _layout(modes: Sequence) -> (list, dict):
    ms = sorted({as_mode(m) for m in modes})
    return ms, {m: i for i, m in enumerate(ms)}


def _pack(rows: list, width: int, pad: int):
    vidx = np.full((len(rows), width), pad, dtype=np.int64)
    coeff = np.empty(len(rows), dtype=complex)
    out = np.empty(len(rows), dtype=np.int64)
    for r, (c, idxs, o) in enumerate(rows):
        coeff[r] = c
        out[r] = o
        vidx[r, :len(idxs)] = idxs
    return vidx, coeff, out


def eta_gradient_table(p: Polynomial, modes: Sequence) -> FieldTable:
    """Compile all partial derivatives d(p)/d(eta_m) for m in the layout."""
    ms, index = _layout(modes)
    n = len(ms)
    rows = []
    width = max(0, p.max_degree() - 1)
    for mono, c in p.items():
        base = []
        for m, e in mono.xi:
            base += [index[m]] * e
        for m, e in mono.eta:
            out = index[m]
            idxs = list(base)
            for m2, e2 in mono.eta:
                reps = e2 - 1 if m2 == m else e2
                idxs += [n + index[m2]] * reps
            rows.append((complex(c) * e, idxs, out))
    vidx, coeff, out = _pack(rows, width, 2 * n)
    return FieldTable(ms, index, vidx, coeff, out)


def value_table(p: Polynomial, modes: Sequence) -> ValueTable:
    ms, index = _layout(modes)
    n = len(ms)
    rows = []
    width = max(0, p.max_degree())
    for mono, c in p.items():
        idxs = []
        for m, e in mono.xi:
            idxs += [index[m]] * e
        for m, e in mono.eta:
            idxs += [n + index[m]] * e
        rows.append((complex(c), idxs, 0))
    vidx, coeff, _ = _pack(rows, width, 2 * n)
    return ValueTable(ms, vidx, coeff)
