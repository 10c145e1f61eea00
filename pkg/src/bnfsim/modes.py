"""Mode labels and Sobolev-type mode weights.

A mode is a point of the integer lattice Z^d, stored as a tuple of ints.
For 1-d problems plain ints are accepted everywhere and normalized to
1-tuples internally.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence, Union

ModeLike = Union[int, Sequence[int]]
Mode = tuple


def as_mode(j: ModeLike) -> tuple:
    """Canonical tuple form of a mode label."""
    if isinstance(j, tuple):
        return j
    if isinstance(j, int):
        return (j,)
    return tuple(int(c) for c in j)


def mode_abs(j: ModeLike) -> float:
    """Euclidean norm |j| of a lattice mode."""
    m = as_mode(j)
    if len(m) == 1:
        return float(abs(m[0]))
    return math.sqrt(sum(c * c for c in m))


def mode_abs2(j: ModeLike) -> int:
    """Squared Euclidean norm, exact integer."""
    m = as_mode(j)
    return sum(c * c for c in m)


def weight(j: ModeLike, s: float) -> float:
    """Mode weight w_s(j) = (1 + |j|)^(2 s)."""
    return (1.0 + mode_abs(j)) ** (2.0 * s)


def mode_str(j: ModeLike) -> str:
    m = as_mode(j)
    if len(m) == 1:
        return str(m[0])
    return ",".join(str(c) for c in m)


def parse_mode(text: str) -> tuple:
    return tuple(int(p) for p in text.split(","))


def lattice_modes(d: int, jmax: float, include_zero: bool = True) -> list:
    """All modes of Z^d with Euclidean norm <= jmax, canonically sorted.

    For d = 1 the zero mode is excluded by default conventions of the 1-d
    models; pass include_zero to control it explicitly.
    """
    rng = range(-int(jmax), int(jmax) + 1)
    out = []
    jmax2 = jmax * jmax + 1e-12

    def rec(prefix):
        if len(prefix) == d:
            if sum(c * c for c in prefix) <= jmax2:
                out.append(tuple(prefix))
            return
        for c in rng:
            rec(prefix + [c])

    rec([])
    if not include_zero:
        out = [m for m in out if any(c != 0 for c in m)]
    out.sort()
    return out


def check_same_dim(modes: Iterable[tuple]) -> int:
    """Common spatial dimension of a mode collection (0 if empty)."""
    d = 0
    for m in modes:
        if d == 0:
            d = len(m)
        elif len(m) != d:
            raise ValueError("mixed mode dimensions: %r" % (m,))
    return d
