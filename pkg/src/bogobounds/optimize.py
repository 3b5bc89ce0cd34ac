"""Budgeted derivative-free minimization with deterministic restarts."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.optimize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizeResult:
    theta: np.ndarray
    value: float
    evaluations: int
    budget_exhausted: bool


class _BudgetSpent(Exception):
    pass


class _Counter:
    def __init__(self, f, budget):
        self.f = f
        self.budget = budget
        self.calls = 0
        self.best_x = None
        self.best_f = np.inf

    def __call__(self, x):
        if self.calls >= self.budget:
            raise _BudgetSpent
        self.calls += 1
        fx = float(self.f(np.array(x, dtype=float)))
        if not np.isfinite(fx):
            fx = np.inf
        # strict improvement keeps the earliest point on ties
        if fx < self.best_f:
            self.best_f, self.best_x = fx, np.array(x, dtype=float)
        return fx


def direct_search(
    f: Callable[[np.ndarray], float],
    n_params: int,
    budget: int,
    *,
    seed: int = 0,
    step: float = 1.0,
    max_restarts: int = 4,
    xatol: float = 1e-10,
    fatol: float = 1e-14,
) -> OptimizeResult:
    """Minimize ``f`` with Nelder-Mead within ``budget`` evaluations.

    The first simplex is the origin plus ``step`` along each axis, so
    ``theta = 0`` is always evaluated first. Once a run converges the
    remaining budget goes to restarts around the incumbent with simplex
    sizes drawn from a generator seeded by ``seed``.
    """
    if n_params < 1:
        raise ValueError("need at least one parameter")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    fun = _Counter(f, budget)
    exhausted = False

    simplex = np.vstack([np.zeros(n_params), step * np.eye(n_params)])
    for restart in range(max_restarts + 1):
        before = fun.best_f
        try:
            scipy.optimize.minimize(
                fun, simplex[0], method="Nelder-Mead",
                options={"initial_simplex": simplex, "maxfev": budget,
                         "xatol": xatol, "fatol": fatol},
            )
        except _BudgetSpent:
            exhausted = True
            break
        if fun.calls >= budget:
            exhausted = True
            break
        if restart and not fun.best_f < before - fatol:
            break
        scale = step * 10.0 ** rng.uniform(-3, -1) * (1.0 + np.abs(fun.best_x))
        directions = rng.choice([-1.0, 1.0], size=n_params)
        simplex = np.vstack([fun.best_x, fun.best_x + np.diag(directions * scale)])
        log.debug("restart %d from f=%.17g", restart + 1, fun.best_f)

    return OptimizeResult(fun.best_x, fun.best_f, fun.calls, exhausted)
