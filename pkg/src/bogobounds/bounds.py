"""Interface free energy and two-sided Bogoliubov bounds.

For ``H = H0 + U`` with canonical states ``rho`` (of ``H``) and ``rho0``
(of ``H0``) the interface free energy ``dF = -log(Z / Z0) / beta`` obeys

    E_rho[U] <= dF <= E_rho0[U]

and both gaps are relative entropies:

    R(rho0, rho) = beta * (E_rho0[U] - dF)
    R(rho, rho0) = beta * (dF - E_rho[U])

The variational families below tighten both sides: for any bounded
observable ``W`` and density matrix ``gamma``

    E_rho[U - W] - log E_rho0[exp(-beta W)] / beta <= dF
    dF <= E_gamma[U] + R(gamma, rho0) / beta
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .gibbs import (
    INFINITE,
    DensityMatrix,
    GibbsResult,
    _check_beta,
    expectation,
    gibbs_state,
    log_partition,
    relative_entropy,
)
from .operators import (
    DimensionError,
    HermitianOperator,
    SiteLayout,
    matrix_func,
    trace_product,
)
from .optimize import OptimizeResult, direct_search
from .terms import Term, assemble_dense


def bound_tolerance(dim: int) -> float:
    """Absolute tolerance for bound comparisons at a given Hilbert-space dimension."""
    return 1e-9 if dim <= 64 else 1e-7


@dataclass(frozen=True, eq=False)
class PartitionedHamiltonian:
    """``H = H0 + U`` on a block layout.

    ``h0_terms`` and ``u_terms`` are kept when the operators came from a
    term list; they feed the matrix-free backend and the per-boundary
    observable families.
    """

    layout: SiteLayout
    H0: HermitianOperator
    U: HermitianOperator
    h0_terms: tuple[Term, ...] = ()
    u_terms: tuple[Term, ...] = ()
    _thermal: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.H0.dim != self.U.dim:
            raise DimensionError(self.H0.dim, self.U.dim)
        if self.layout.dim != self.H0.dim:
            raise DimensionError(self.layout.dim, self.H0.dim, "layout dimension")

    @classmethod
    def from_operators(cls, H0, U, layout: SiteLayout | None = None) -> PartitionedHamiltonian:
        H0 = H0 if isinstance(H0, HermitianOperator) else HermitianOperator(H0)
        U = U if isinstance(U, HermitianOperator) else HermitianOperator(U)
        if layout is None:
            layout = SiteLayout((H0.dim,), (0,))
        return cls(layout, H0, U)

    @classmethod
    def from_terms(cls, layout: SiteLayout, h0_terms: Sequence[Term],
                   u_terms: Sequence[Term]) -> PartitionedHamiltonian:
        return cls(layout, assemble_dense(h0_terms, layout), assemble_dense(u_terms, layout),
                   tuple(h0_terms), tuple(u_terms))

    @functools.cached_property
    def H(self) -> HermitianOperator:
        return self.H0 + self.U

    @property
    def dim(self) -> int:
        return self.H0.dim

    def scaled(self, s: float) -> PartitionedHamiltonian:
        """Same ``H0`` with the coupling multiplied by ``s``."""
        return PartitionedHamiltonian(self.layout, self.H0, self.U.scale(s), self.h0_terms,
                                      tuple(t.scaled(s) for t in self.u_terms))

    def conjugate_by(self, unitary) -> PartitionedHamiltonian:
        return PartitionedHamiltonian(self.layout, self.H0.conjugate_by(unitary),
                                      self.U.conjugate_by(unitary))

    def thermal(self, beta: float) -> tuple[GibbsResult, GibbsResult]:
        """Gibbs states of ``H`` and ``H0`` at ``beta`` (cached)."""
        beta = _check_beta(beta)
        if beta not in self._thermal:
            self._thermal[beta] = (gibbs_state(self.H, beta), gibbs_state(self.H0, beta))
        return self._thermal[beta]


@dataclass(frozen=True)
class BoundsReport:
    beta: float
    delta_F: float
    lower: float
    upper: float
    residual_upper: float
    residual_lower: float
    gap: float

    def ordered(self, tol: float = 1e-9) -> bool:
        return self.lower - tol <= self.delta_F <= self.upper + tol


@dataclass(frozen=True, eq=False)
class ObservableFamily:
    """Linear span ``W(theta) = sum_i theta_i B_i``."""

    basis: tuple[HermitianOperator, ...]

    def __post_init__(self):
        basis = tuple(self.basis)
        if not basis:
            raise ValueError("observable family needs at least one basis element")
        if len({b.dim for b in basis}) != 1:
            raise ValueError("all basis observables must share one dimension")
        object.__setattr__(self, "basis", basis)

    @classmethod
    def coupling(cls, P: PartitionedHamiltonian) -> ObservableFamily:
        return cls((P.U,))

    @classmethod
    def per_boundary(cls, P: PartitionedHamiltonian) -> ObservableFamily:
        """One basis element per pair of blocks joined by coupling terms."""
        if not P.u_terms:
            return cls.coupling(P)
        groups: dict[tuple[int, ...], list[Term]] = {}
        for t in P.u_terms:
            key = tuple(sorted(P.layout.blocks_touched(t.sites)))
            groups.setdefault(key, []).append(t)
        return cls(tuple(assemble_dense(groups[k], P.layout) for k in sorted(groups)))

    @property
    def size(self) -> int:
        return len(self.basis)

    @property
    def dim(self) -> int:
        return self.basis[0].dim

    def observable(self, theta) -> HermitianOperator:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape != (self.size,):
            raise ValueError(f"theta must have {self.size} entries")
        total = np.zeros_like(self.basis[0].entries)
        for c, b in zip(theta, self.basis):
            total = total + c * b.entries
        return HermitianOperator(total)


@dataclass(frozen=True, eq=False)
class TrialStateFamily:
    """``gamma(theta) = exp(log sigma - beta W(theta)) / Tr(...)``."""

    reference: DensityMatrix
    observables: ObservableFamily

    def __post_init__(self):
        if self.reference.dim != self.observables.dim:
            raise DimensionError(self.reference.dim, self.observables.dim)

    @classmethod
    def around_decoupled(cls, P: PartitionedHamiltonian, beta: float,
                         observables: ObservableFamily | None = None) -> TrialStateFamily:
        """Tilts of ``rho0`` along ``observables`` (default: the coupling itself)."""
        _, g0 = P.thermal(beta)
        return cls(g0.state, observables or ObservableFamily.coupling(P))

    def state(self, theta, beta: float) -> DensityMatrix:
        theta = np.asarray(theta, dtype=float)
        if not np.any(theta):
            return self.reference
        return gibbs_minimizer(self.observables.observable(theta), self.reference, beta)


def interface_free_energy(P: PartitionedHamiltonian, beta: float) -> float:
    beta = _check_beta(beta)
    return -(log_partition(P.H.spectrum, beta) - log_partition(P.H0.spectrum, beta)) / beta


def bogoliubov_bounds(P: PartitionedHamiltonian, beta: float) -> BoundsReport:
    """Exact ``dF`` with the two-sided bounds and their entropy residuals.

    The residuals compare directly computed relative entropies against the
    closed-form identities, so they vanish up to rounding.
    """
    beta = _check_beta(beta)
    g, g0 = P.thermal(beta)
    rho, rho0 = g.state, g0.state
    delta_f = -(g.log_Z - g0.log_Z) / beta
    lower = expectation(rho, P.U)
    upper = expectation(rho0, P.U)
    r_up = relative_entropy(rho0, rho)
    r_low = relative_entropy(rho, rho0)
    if r_up is INFINITE or r_low is INFINITE:
        raise ArithmeticError("Gibbs states lost full support; relative entropy is infinite")
    return BoundsReport(
        beta=beta,
        delta_F=delta_f,
        lower=lower,
        upper=upper,
        residual_upper=r_up - beta * (upper - delta_f),
        residual_lower=r_low - beta * (delta_f - lower),
        gap=upper - lower,
    )


def _trace_exp(s) -> float:
    lam = s.eigenvalues
    return float(np.sum(np.exp(lam)))


def golden_thompson_gap(a: HermitianOperator, b: HermitianOperator) -> float:
    """``Tr(e^A e^B) - Tr(e^(A+B))``; non-negative, zero for commuting pairs."""
    if a.dim != b.dim:
        raise DimensionError(a.dim, b.dim)
    ea = matrix_func(a.spectrum, np.exp)
    eb = matrix_func(b.spectrum, np.exp)
    return trace_product(ea, eb) - _trace_exp((a + b).spectrum)


def _log_mean_exp(state: DensityMatrix, x: HermitianOperator, scale: float) -> float:
    """``log Tr(state exp(scale * X))`` with the largest exponent factored out."""
    s = x.spectrum
    e = scale * s.eigenvalues
    top = float(np.max(e))
    if float(np.min(e)) == top:
        return top
    return top + float(np.log(trace_product(state, matrix_func(s, lambda _: np.exp(e - top)))))


def variational_lower(P: PartitionedHamiltonian, beta: float, W: HermitianOperator) -> float:
    """``E_rho[U - W] - log E_rho0[exp(-beta W)] / beta``; never exceeds ``dF``."""
    beta = _check_beta(beta)
    g, g0 = P.thermal(beta)
    return expectation(g.state, P.U - W) - _log_mean_exp(g0.state, W, -beta) / beta


def variational_upper(P: PartitionedHamiltonian, beta: float, gamma: DensityMatrix):
    """``E_gamma[U] + R(gamma, rho0) / beta``; ``INFINITE`` off the support of ``rho0``."""
    beta = _check_beta(beta)
    _, g0 = P.thermal(beta)
    r = relative_entropy(gamma, g0.state)
    if r is INFINITE:
        return INFINITE
    return expectation(gamma, P.U) + r / beta


def gibbs_functional(V: HermitianOperator, gamma: DensityMatrix, beta: float) -> float:
    """``Tr(gamma V) + Tr(gamma log gamma) / beta``, bounded below by ``-log Z_V / beta``."""
    beta = _check_beta(beta)
    logs, support = gamma.log_eigenvalues()
    p = gamma.weights
    return expectation(gamma, V) + float(np.sum(p[support] * logs[support])) / beta


def _full_rank_log(sigma: DensityMatrix) -> HermitianOperator:
    logs, support = sigma.log_eigenvalues()
    if not np.all(support):
        raise ValueError("reference state is rank-deficient; log sigma is unbounded")
    return matrix_func(sigma.spectrum, lambda _: logs)


def gibbs_minimizer(W: HermitianOperator, sigma: DensityMatrix, beta: float) -> DensityMatrix:
    """Minimizer of ``Tr(gamma W) + R(gamma, sigma) / beta`` over density matrices.

    This is ``exp(log sigma - beta W)`` normalized, i.e. the Gibbs state of
    ``W - log(sigma) / beta``. It reduces to ``sigma exp(-beta W)``
    normalized when ``W`` and ``sigma`` commute.
    """
    beta = _check_beta(beta)
    if W.dim != sigma.dim:
        raise DimensionError(sigma.dim, W.dim)
    v = W - _full_rank_log(sigma).scale(1.0 / beta)
    return gibbs_state(v, beta).state


class TiltedFreeEnergies(NamedTuple):
    trace_form: float     # -log Tr(sigma exp(-beta W)) / beta
    exponent_form: float  # -log Tr exp(log sigma - beta W) / beta
    gap: float            # exponent_form - trace_form, >= 0 by Golden-Thompson


def tilted_free_energies(W: HermitianOperator, sigma: DensityMatrix, beta: float) -> TiltedFreeEnergies:
    """Both candidate values for ``inf_gamma Tr(gamma W) + R(gamma, sigma) / beta``.

    The infimum itself is ``exponent_form``; ``trace_form`` is the smaller
    quantity obtained after Golden-Thompson. They agree when ``[W, sigma] = 0``.
    """
    beta = _check_beta(beta)
    trace_form = -_log_mean_exp(sigma, W, -beta) / beta
    v = W - _full_rank_log(sigma).scale(1.0 / beta)
    exponent_form = -log_partition(v.spectrum, beta) / beta
    return TiltedFreeEnergies(trace_form, exponent_form, exponent_form - trace_form)


def donsker_varadhan_value(gamma: DensityMatrix, sigma: DensityMatrix, psi: HermitianOperator) -> float:
    """``Tr(gamma psi) - log Tr(sigma e^psi)``, a lower bound on ``R(gamma, sigma)``."""
    if gamma.dim != sigma.dim or gamma.dim != psi.dim:
        raise DimensionError(gamma.dim, (sigma.dim, psi.dim))
    return expectation(gamma, psi) - _log_mean_exp(sigma, psi, 1.0)


@dataclass(frozen=True)
class VariationalResult:
    theta: np.ndarray
    value: float
    evaluations: int
    budget_exhausted: bool

    def __iter__(self):
        # unpacks as (theta, value)
        return iter((self.theta, self.value))


def _wrap(res: OptimizeResult, sign: float) -> VariationalResult:
    return VariationalResult(res.theta, sign * res.value, res.evaluations, res.budget_exhausted)


def optimize_lower(P: PartitionedHamiltonian, beta: float, family: ObservableFamily,
                   budget: int = 200, *, seed: int = 0) -> VariationalResult:
    """Maximize ``variational_lower`` over ``W(theta)``, starting at ``theta = 0``."""
    beta = _check_beta(beta)
    if family.dim != P.dim:
        raise DimensionError(P.dim, family.dim)

    def neg(theta):
        return -variational_lower(P, beta, family.observable(theta))

    return _wrap(direct_search(neg, family.size, budget, seed=seed), -1.0)


def optimize_upper(P: PartitionedHamiltonian, beta: float, family: TrialStateFamily,
                   budget: int = 200, *, seed: int = 0) -> VariationalResult:
    """Minimize ``variational_upper`` over ``gamma(theta)``, starting at ``gamma = sigma``."""
    beta = _check_beta(beta)
    if family.reference.dim != P.dim:
        raise DimensionError(P.dim, family.reference.dim)
    _full_rank_log(family.reference)

    def value(theta):
        v = variational_upper(P, beta, family.state(theta, beta))
        return np.inf if v is INFINITE else v

    return _wrap(direct_search(value, family.observables.size, budget, seed=seed), 1.0)
