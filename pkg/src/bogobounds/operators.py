"""Dense Hermitian linear algebra on finite-dimensional Hilbert spaces.

Site ordering follows the usual Kronecker convention: site 0 is the
slowest-varying factor, so for two qubits ``Z`` on site 0 is
``diag(1, 1, -1, -1)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

HERMITICITY_TOL = 1e-12
TRACE_IMAG_TOL = 1e-10


class EigensolverError(RuntimeError):
    """Raised when LAPACK fails to diagonalize a Hermitian matrix."""

    def __init__(self, dim: int, attempts: int, reason: str = ""):
        self.dim = dim
        self.attempts = attempts
        msg = f"eigensolver did not converge for dim={dim} after {attempts} attempt(s)"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class DimensionError(ValueError):
    """Operand dimensions do not match."""

    def __init__(self, expected, actual, what: str = "dimension"):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what} mismatch: expected {expected}, got {actual}")


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Dense complex Hermitian matrix.

    The input is checked for Hermiticity (max entrywise deviation relative
    to the largest entry) and then symmetrized as ``(A + A^H) / 2`` so the
    stored matrix is exactly Hermitian.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("operator has non-finite entries")
        dev = np.max(np.abs(a - a.conj().T))
        scale = max(1.0, float(np.max(np.abs(a))))
        if dev > HERMITICITY_TOL * scale:
            raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3e})")
        a = 0.5 * (a + a.conj().T)
        object.__setattr__(self, "entries", _freeze(a))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @functools.cached_property
    def spectrum(self) -> SpectralDecomposition:
        return hermitian_eig(self)

    @classmethod
    def identity(cls, dim: int) -> HermitianOperator:
        return cls(np.eye(dim))

    @classmethod
    def zeros(cls, dim: int) -> HermitianOperator:
        return cls(np.zeros((dim, dim)))

    @classmethod
    def diag(cls, values: Sequence[float]) -> HermitianOperator:
        return cls(np.diag(np.asarray(values, dtype=float)))

    def __add__(self, other: HermitianOperator) -> HermitianOperator:
        _check_dims(self, other)
        return HermitianOperator(self.entries + other.entries)

    def __sub__(self, other: HermitianOperator) -> HermitianOperator:
        _check_dims(self, other)
        return HermitianOperator(self.entries - other.entries)

    def __neg__(self) -> HermitianOperator:
        return HermitianOperator(-self.entries)

    def scale(self, c: float) -> HermitianOperator:
        return HermitianOperator(float(c) * self.entries)

    def conjugate_by(self, unitary: np.ndarray) -> HermitianOperator:
        """Return ``V A V^H``."""
        v = np.asarray(unitary)
        return HermitianOperator(v @ self.entries @ v.conj().T)

    def commutator_norm(self, other: HermitianOperator) -> float:
        """Max-entry norm of ``[A, B]``."""
        a, b = self.entries, other.entries
        return float(np.max(np.abs(a @ b - b @ a)))

    def is_diagonal(self) -> bool:
        a = self.entries
        return not np.any(a - np.diag(np.diag(a)))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Ascending eigenvalues and orthonormal eigenvectors (as columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _freeze(np.asarray(self.eigenvalues, dtype=float)))
        object.__setattr__(self, "eigenvectors", _freeze(np.asarray(self.eigenvectors, dtype=complex)))

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self, values: np.ndarray | None = None) -> np.ndarray:
        """Return ``V diag(values) V^H`` (the source matrix by default)."""
        lam = self.eigenvalues if values is None else values
        v = self.eigenvectors
        return (v * lam) @ v.conj().T


@dataclass(frozen=True)
class SiteLayout:
    """Local dimension of each site and the block each site belongs to."""

    site_dims: tuple[int, ...]
    block_of_site: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.site_dims)
        blocks = tuple(int(b) for b in self.block_of_site)
        if not dims:
            raise ValueError("layout needs at least one site")
        if any(d < 1 for d in dims):
            raise ValueError(f"site dimensions must be positive, got {dims}")
        if len(blocks) != len(dims):
            raise ValueError("block_of_site must have one entry per site")
        n_blocks = max(blocks) + 1
        if min(blocks) < 0 or set(blocks) != set(range(n_blocks)):
            raise ValueError(f"every block in [0, {n_blocks}) must own at least one site")
        object.__setattr__(self, "site_dims", dims)
        object.__setattr__(self, "block_of_site", blocks)

    @classmethod
    def contiguous(cls, site_dims: Sequence[int], n_blocks: int) -> SiteLayout:
        """Split the sites into ``n_blocks`` contiguous runs of near-equal length."""
        n = len(site_dims)
        if not 1 <= n_blocks <= n:
            raise ValueError(f"need 1 <= d <= N, got d={n_blocks}, N={n}")
        blocks = []
        for b, chunk in enumerate(np.array_split(np.arange(n), n_blocks)):
            blocks.extend([b] * len(chunk))
        return cls(tuple(site_dims), tuple(blocks))

    @property
    def n_sites(self) -> int:
        return len(self.site_dims)

    @property
    def n_blocks(self) -> int:
        return max(self.block_of_site) + 1

    @property
    def dim(self) -> int:
        return int(np.prod(self.site_dims))

    def sites_in_block(self, block: int) -> list[int]:
        return [s for s, b in enumerate(self.block_of_site) if b == block]

    def blocks_touched(self, sites: Sequence[int]) -> set[int]:
        return {self.block_of_site[s] for s in sites}


def _check_dims(a, b):
    if a.dim != b.dim:
        raise DimensionError(a.dim, b.dim)


def hermitian_eig(a: HermitianOperator) -> SpectralDecomposition:
    """Diagonalize ``a``; eigenvalues come back in ascending order.

    Falls back from the divide-and-conquer driver to the QR driver before
    giving up.
    """
    drivers = ("evd", "ev")
    last = ""
    for attempt, driver in enumerate(drivers, start=1):
        try:
            lam, v = scipy.linalg.eigh(a.entries, driver=driver, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            last = str(exc)
            continue
        order = np.argsort(lam, kind="stable")
        return SpectralDecomposition(lam[order], v[:, order])
    raise EigensolverError(a.dim, len(drivers), last)


def matrix_func(s: SpectralDecomposition, f: Callable[[np.ndarray], np.ndarray]) -> HermitianOperator:
    """Spectral calculus: ``V diag(f(lambda)) V^H``.

    ``f`` is applied to the whole eigenvalue vector at once and must return
    real, finite values.
    """
    with np.errstate(all="ignore"):
        values = np.asarray(f(s.eigenvalues), dtype=float)
    if values.shape != s.eigenvalues.shape:
        raise ValueError("f must map the eigenvalue vector elementwise")
    bad = ~np.isfinite(values)
    if np.any(bad):
        lam = s.eigenvalues[np.argmax(bad)]
        raise ValueError(f"function is not finite at eigenvalue {lam!r}")
    return HermitianOperator(s.reconstruct(values))


def kron_embed(local: HermitianOperator, layout: SiteLayout, sites: Sequence[int]) -> HermitianOperator:
    """Place ``local`` on ``sites`` (in the given order), identity elsewhere."""
    return HermitianOperator(embed_array(local.entries, layout.site_dims, sites))


def embed_array(local: np.ndarray, site_dims: Sequence[int], sites: Sequence[int]) -> np.ndarray:
    sites = [int(s) for s in sites]
    n = len(site_dims)
    if len(set(sites)) != len(sites):
        raise ValueError(f"sites must be distinct, got {sites}")
    if any(not 0 <= s < n for s in sites):
        raise ValueError(f"site index out of range for {n} sites: {sites}")
    local_dims = [site_dims[s] for s in sites]
    expected = int(np.prod(local_dims))
    if local.shape != (expected, expected):
        raise DimensionError((expected, expected), local.shape, "local operator shape")

    rest = [s for s in range(n) if s not in sites]
    rest_dim = int(np.prod([site_dims[s] for s in rest])) if rest else 1
    full = np.kron(local, np.eye(rest_dim))
    if sites == list(range(len(sites))):
        return full
    # reorder tensor legs from (sites..., rest...) into natural site order
    order = sites + rest
    dims = [site_dims[s] for s in order]
    t = full.reshape(dims + dims)
    perm = [order.index(s) for s in range(n)]
    t = t.transpose(perm + [p + n for p in perm])
    total = int(np.prod(site_dims))
    return t.reshape(total, total)


def trace_product(a, b, *, with_residue: bool = False):
    """``Tr(AB)`` as ``sum_ij A_ij B_ji`` without forming ``AB``.

    Accepts anything with an ``entries`` array or an ``op`` attribute
    (density matrices). The imaginary residue must vanish for Hermitian
    inputs; it is checked against the magnitude of the summands.
    """
    a = _entries(a)
    b = _entries(b)
    if a.shape != b.shape:
        raise DimensionError(a.shape, b.shape)
    terms = a * b.T
    total = terms.sum()
    residue = abs(total.imag)
    if residue > TRACE_IMAG_TOL * max(1.0, float(np.abs(terms).sum())):
        raise ValueError(f"Tr(AB) has imaginary residue {residue:.3e}; inputs not Hermitian?")
    if with_residue:
        return float(total.real), float(residue)
    return float(total.real)


def _entries(x) -> np.ndarray:
    if hasattr(x, "op"):
        x = x.op
    if hasattr(x, "entries"):
        return x.entries
    return np.asarray(x)


# Standard single-site operators. Z = diag(1, -1).
PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def annihilation(cutoff: int) -> np.ndarray:
    """Truncated bosonic lowering operator, ``a|n> = sqrt(n)|n-1>``."""
    return np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), k=1).astype(complex)


def random_hermitian(rng: np.random.Generator, dim: int, scale: float = 1.0) -> HermitianOperator:
    """GUE-like matrix normalized so the spectrum is O(scale)."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return HermitianOperator(scale * (g + g.conj().T) / (2.0 * np.sqrt(2.0 * dim)))


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))
