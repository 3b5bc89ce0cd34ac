"""Two-sided Bogoliubov bounds for a finite classical ensemble.

Plain-Python direct summation over states, sharing no code with the
operator path. For diagonal ``H0`` and ``U`` it must reproduce the
quantum results, which makes it the reference for commuting instances.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence


class ClassicalBounds(NamedTuple):
    lower: float
    delta_F: float
    upper: float


def _log_sum_exp(xs: Sequence[float]) -> float:
    top = max(xs)
    return top + math.log(math.fsum(math.exp(x - top) for x in xs))


def canonical_weights(energies: Sequence[float], beta: float) -> list[float]:
    logs = [-beta * e for e in energies]
    log_z = _log_sum_exp(logs)
    return [math.exp(x - log_z) for x in logs]


def classical_bounds(h0: Sequence[float], u: Sequence[float], beta: float) -> ClassicalBounds:
    """``(E_p[U], dF, E_p0[U])`` for state energies ``h0`` and coupling ``u``."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if len(h0) != len(u):
        raise ValueError("h0 and u must have the same number of states")
    h = [a + b for a, b in zip(h0, u)]
    p = canonical_weights(h, beta)
    p0 = canonical_weights(h0, beta)
    log_z = _log_sum_exp([-beta * e for e in h])
    log_z0 = _log_sum_exp([-beta * e for e in h0])
    return ClassicalBounds(
        lower=math.fsum(pi * ui for pi, ui in zip(p, u)),
        delta_F=-(log_z - log_z0) / beta,
        upper=math.fsum(pi * ui for pi, ui in zip(p0, u)),
    )


def kl_divergence(p: Sequence[float], q: Sequence[float]) -> float:
    """Discrete Kullback-Leibler divergence with ``0 log 0 = 0``; ``inf`` off support."""
    total = []
    for pi, qi in zip(p, q):
        if pi == 0:
            continue
        if qi == 0:
            return math.inf
        total.append(pi * math.log(pi / qi))
    return math.fsum(total)
