"""Density matrices, Gibbs states and entropies."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .operators import (
    DimensionError,
    HermitianOperator,
    SpectralDecomposition,
    matrix_func,
    trace_product,
)

PSD_TOL = 1e-12
TRACE_TOL = 1e-10
DEFAULT_SUPPORT_TOL = 1e-12


class Divergence(enum.Enum):
    """Tagged result for a divergence that is infinite.

    Deliberately not a float: arithmetic on it raises, so callers have to
    branch on ``value is INFINITE``.
    """

    INFINITE = "inf"

    def __repr__(self):
        return "INFINITE"


INFINITE = Divergence.INFINITE


def is_infinite(value) -> bool:
    return value is INFINITE


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Positive semidefinite, unit-trace Hermitian operator.

    Eigenvalues in ``[-1e-12, 0)`` are clamped to zero and the trace is
    renormalized to exactly one; the stored ``op`` is rebuilt from the
    cleaned spectrum. ``log_weights`` optionally carries exact logarithms
    of the eigenvalues (known in closed form for Gibbs states), which keeps
    ``log rho`` finite where the weights themselves underflow.
    """

    op: HermitianOperator
    spectrum: SpectralDecomposition | None = None
    support_tol: float = DEFAULT_SUPPORT_TOL
    log_weights: np.ndarray | None = None

    def __post_init__(self):
        op = self.op if isinstance(self.op, HermitianOperator) else HermitianOperator(self.op)
        spec = self.spectrum if self.spectrum is not None else op.spectrum
        p = spec.eigenvalues
        if p[0] < -PSD_TOL:
            raise ValueError(f"density matrix has negative eigenvalue {p[0]:.3e}")
        tr = float(np.sum(p))
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        p = np.clip(p, 0.0, 1.0)
        p = p / np.sum(p)
        spec = SpectralDecomposition(p, spec.eigenvectors)
        object.__setattr__(self, "spectrum", spec)
        object.__setattr__(self, "op", HermitianOperator(spec.reconstruct()))
        if self.log_weights is not None:
            lw = np.asarray(self.log_weights, dtype=float)
            if lw.shape != p.shape:
                raise ValueError("log_weights must align with the eigenvalues")
            lw.setflags(write=False)
            object.__setattr__(self, "log_weights", lw)

    @classmethod
    def from_array(cls, a, support_tol: float = DEFAULT_SUPPORT_TOL) -> DensityMatrix:
        return cls(HermitianOperator(a), support_tol=support_tol)

    @classmethod
    def from_spectrum(cls, weights, vectors, *, log_weights=None,
                      support_tol: float = DEFAULT_SUPPORT_TOL) -> DensityMatrix:
        weights = np.asarray(weights, dtype=float)
        order = np.argsort(weights, kind="stable")
        spec = SpectralDecomposition(weights[order], np.asarray(vectors)[:, order])
        if log_weights is not None:
            log_weights = np.asarray(log_weights, dtype=float)[order]
        return cls(HermitianOperator(spec.reconstruct()), spec, support_tol, log_weights)

    @classmethod
    def maximally_mixed(cls, dim: int) -> DensityMatrix:
        return cls.from_spectrum(np.full(dim, 1.0 / dim), np.eye(dim),
                                 log_weights=np.full(dim, -np.log(dim)))

    @property
    def dim(self) -> int:
        return self.op.dim

    @property
    def entries(self) -> np.ndarray:
        return self.op.entries

    @property
    def weights(self) -> np.ndarray:
        return self.spectrum.eigenvalues

    def log_eigenvalues(self, support_tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Logs of the eigenvalues and the support mask.

        Directions outside the support get log value 0 so they drop out of
        traces; the mask tells callers which ones they were.
        """
        if self.log_weights is not None:
            return self.log_weights, np.ones(self.dim, dtype=bool)
        tol = self.support_tol if support_tol is None else support_tol
        p = self.weights
        support = p >= tol
        logs = np.zeros_like(p)
        logs[support] = np.log(p[support])
        return logs, support

    def log(self) -> HermitianOperator:
        """``log rho`` on the support, zero on the kernel."""
        logs, _ = self.log_eigenvalues()
        return matrix_func(self.spectrum, lambda _: logs)

    def conjugate_by(self, unitary) -> DensityMatrix:
        """Return ``V rho V^H`` without re-diagonalizing."""
        v = np.asarray(unitary) @ self.spectrum.eigenvectors
        spec = SpectralDecomposition(self.weights, v)
        return DensityMatrix(HermitianOperator(spec.reconstruct()), spec,
                             self.support_tol, self.log_weights)


@dataclass(frozen=True, eq=False)
class GibbsResult:
    state: DensityMatrix
    log_Z: float
    beta: float


def _spectrum_of(h) -> SpectralDecomposition:
    if isinstance(h, SpectralDecomposition):
        return h
    return h.spectrum


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not beta > 0 or not np.isfinite(beta):
        raise ValueError(f"beta must be a finite positive number, got {beta!r}")
    return beta


def log_partition(s, beta: float) -> float:
    """``log Tr exp(-beta H)`` from the spectrum of ``H``, shifted by the ground energy."""
    beta = _check_beta(beta)
    lam = _spectrum_of(s).eigenvalues
    if not np.all(np.isfinite(lam)):
        raise ValueError("eigenvalues must be finite")
    lo = lam[0]
    return float(-beta * lo + np.log(np.sum(np.exp(-beta * (lam - lo)))))


def gibbs_state(h: HermitianOperator, beta: float) -> GibbsResult:
    """Canonical state ``exp(-beta H) / Z``, sharing eigenvectors with ``H``."""
    beta = _check_beta(beta)
    s = _spectrum_of(h)
    lam = s.eigenvalues
    shifted = -beta * (lam - lam[0])
    log_norm = float(np.log(np.sum(np.exp(shifted))))
    log_w = shifted - log_norm
    state = DensityMatrix.from_spectrum(np.exp(log_w), s.eigenvectors, log_weights=log_w)
    return GibbsResult(state, float(-beta * lam[0] + log_norm), beta)


def expectation(rho: DensityMatrix, t: HermitianOperator) -> float:
    """``Tr(rho T)``."""
    if rho.dim != t.dim:
        raise DimensionError(rho.dim, t.dim)
    return trace_product(rho.op, t)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    logs, support = rho.log_eigenvalues()
    p = rho.weights
    s = -float(np.sum(p[support] * logs[support]))
    return min(max(s, 0.0), float(np.log(rho.dim)))


def _support_violation(rho_op: np.ndarray, vectors: np.ndarray, kernel: np.ndarray, tol: float) -> bool:
    if not np.any(kernel):
        return False
    v = vectors[:, kernel]
    weights = np.einsum("ik,ij,jk->k", v.conj(), rho_op, v).real
    return bool(np.any(weights > tol))


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix, support_tol: float | None = None):
    """Umegaki relative entropy ``Tr(rho log rho) - Tr(rho log sigma)``.

    Returns ``INFINITE`` when ``rho`` puts weight above ``support_tol`` on a
    direction where ``sigma`` has eigenvalue below ``support_tol``.
    """
    if rho.dim != sigma.dim:
        raise DimensionError(rho.dim, sigma.dim)
    tol = sigma.support_tol if support_tol is None else support_tol

    log_q, support_q = sigma.log_eigenvalues(tol)
    if _support_violation(rho.entries, sigma.spectrum.eigenvectors, ~support_q, tol):
        return INFINITE

    log_p, support_p = rho.log_eigenvalues(tol)
    p = rho.weights
    self_term = float(np.sum(p[support_p] * log_p[support_p]))
    if rho.spectrum.eigenvectors is sigma.spectrum.eigenvectors:
        # shared eigenbasis: both traces are diagonal sums
        cross = float(np.sum(p * log_q))
    else:
        log_sigma = matrix_func(sigma.spectrum, lambda _: log_q)
        cross = trace_product(rho.op, log_sigma)
    return self_term - cross


def _psd_spectrum(x, what: str) -> tuple[SpectralDecomposition, np.ndarray]:
    if isinstance(x, DensityMatrix):
        return x.spectrum, x.entries
    if not isinstance(x, HermitianOperator):
        x = HermitianOperator(x)
    s = x.spectrum
    if s.eigenvalues[0] < -PSD_TOL:
        raise ValueError(f"{what} is not positive semidefinite (eigenvalue {s.eigenvalues[0]:.3e})")
    return SpectralDecomposition(np.clip(s.eigenvalues, 0.0, None), s.eigenvectors), x.entries


def klein_gap(a, b, support_tol: float = DEFAULT_SUPPORT_TOL):
    """Klein gap ``Tr(B log B) - Tr(B log A) - Tr(B) + Tr(A)`` for PSD ``A``, ``B``.

    Klein's inequality says the gap is non-negative; for unit-trace inputs
    it is the relative entropy ``R(B, A)``. Returns ``INFINITE`` when ``B``
    has weight outside the support of ``A``.
    """
    sa, a_entries = _psd_spectrum(a, "A")
    sb, b_entries = _psd_spectrum(b, "B")
    if sa.dim != sb.dim:
        raise DimensionError(sa.dim, sb.dim)
    support_a = sa.eigenvalues >= support_tol
    if _support_violation(b_entries, sa.eigenvectors, ~support_a, support_tol):
        return INFINITE
    qa = sa.eigenvalues
    log_a = np.where(support_a, np.log(np.where(support_a, qa, 1.0)), 0.0)
    qb = sb.eigenvalues
    support_b = qb >= support_tol
    b_log_b = float(np.sum(qb[support_b] * np.log(qb[support_b])))
    b_log_a = trace_product(b_entries, sa.reconstruct(log_a))
    return b_log_b - b_log_a - float(np.sum(qb)) + float(np.sum(qa))
