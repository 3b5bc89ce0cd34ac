"""Concrete partitioned Hamiltonians.

Conventions: ``Z = diag(1, -1)``; bosonic modes are truncated to the
lowest ``fock_cutoff`` number states with ``a|n> = sqrt(n)|n-1>`` and
``q = (a + a^dagger) / sqrt(2)``. The cutoff is a hard truncation, so
spectra of the oscillator chain are only as good as the cutoff allows.

Sites are split into ``d`` contiguous blocks of near-equal length.
Single-site terms and bonds inside a block go to ``H0``; bonds that join
two blocks (including the wrap-around bond of a periodic chain) go to
``U``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .bounds import PartitionedHamiltonian
from .operators import PAULI_X, PAULI_Y, PAULI_Z, SiteLayout, annihilation
from .terms import Term, crosses_blocks

MAX_DENSE_DIM = 2 ** 13

MODEL_KINDS = ("ising_chain", "xxz_chain", "oscillator_chain", "diagonal_random")
BOUNDARIES = ("open", "periodic")

_DEFAULT_COUPLINGS = {
    "ising_chain": {"J": 1.0, "h": 0.5},
    "xxz_chain": {"Jx": 1.0, "Jz": 1.0, "h": 0.0},
    "oscillator_chain": {"omega": 1.0, "g": 0.1, "fock_cutoff": 4},
    "diagonal_random": {"seed": 0, "dim": 16, "zero_coupling": False},
}


class ModelTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    N: int = 1
    d: int = 1
    couplings: dict[str, Any] = field(default_factory=dict)
    boundary: str = "open"

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; allowed: {', '.join(MODEL_KINDS)}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if not (isinstance(self.N, int) and isinstance(self.d, int)) or not self.N >= self.d >= 1:
            raise ValueError(f"need integers N >= d >= 1, got N={self.N!r}, d={self.d!r}")
        unknown = set(self.couplings) - set(_DEFAULT_COUPLINGS[self.kind])
        if unknown:
            raise ValueError(f"unknown couplings for {self.kind}: {sorted(unknown)}")
        merged = {**_DEFAULT_COUPLINGS[self.kind], **self.couplings}
        object.__setattr__(self, "couplings", merged)

    def param(self, name: str):
        return self.couplings[name]

    @property
    def model_id(self) -> str:
        if self.kind == "diagonal_random":
            return f"diagonal_random-dim{self.param('dim')}-seed{self.param('seed')}"
        return f"{self.kind}-N{self.N}-d{self.d}-{self.boundary}"

    @property
    def dim(self) -> int:
        if self.kind == "diagonal_random":
            return int(self.param("dim"))
        local = int(self.param("fock_cutoff")) if self.kind == "oscillator_chain" else 2
        return local ** self.N


def _bonds(n: int, boundary: str) -> list[tuple[int, int]]:
    bonds = [(i, i + 1) for i in range(n - 1)]
    if boundary == "periodic" and n > 2:
        bonds.append((n - 1, 0))
    return bonds


def _split(layout: SiteLayout, terms: list[Term]) -> tuple[list[Term], list[Term]]:
    h0 = [t for t in terms if not crosses_blocks(t, layout)]
    u = [t for t in terms if crosses_blocks(t, layout)]
    return h0, u


def check_block_structure(layout: SiteLayout, h0_terms, u_terms) -> None:
    """Every ``H0`` term stays inside one block; every ``U`` term crosses a boundary."""
    for t in h0_terms:
        if crosses_blocks(t, layout):
            raise ValueError(f"H0 term {t.label!r} on sites {t.sites} spans several blocks")
    for t in u_terms:
        if not crosses_blocks(t, layout):
            raise ValueError(f"U term {t.label!r} on sites {t.sites} lies inside one block")


def _ising_terms(spec: ModelSpec) -> list[Term]:
    J, h = float(spec.param("J")), float(spec.param("h"))
    terms = [Term(-J, (i, j), (PAULI_Z, PAULI_Z), f"ZZ{i},{j}") for i, j in _bonds(spec.N, spec.boundary)]
    if h:
        terms += [Term(-h, (i,), (PAULI_X,), f"X{i}") for i in range(spec.N)]
    return terms


def _xxz_terms(spec: ModelSpec) -> list[Term]:
    jx, jz, h = (float(spec.param(k)) for k in ("Jx", "Jz", "h"))
    terms = []
    for i, j in _bonds(spec.N, spec.boundary):
        if jx:
            terms.append(Term(jx, (i, j), (PAULI_X, PAULI_X), f"XX{i},{j}"))
            terms.append(Term(jx, (i, j), (PAULI_Y, PAULI_Y), f"YY{i},{j}"))
        if jz:
            terms.append(Term(jz, (i, j), (PAULI_Z, PAULI_Z), f"ZZ{i},{j}"))
    if h:
        terms += [Term(h, (i,), (PAULI_Z,), f"Z{i}") for i in range(spec.N)]
    return terms


def _oscillator_terms(spec: ModelSpec) -> list[Term]:
    m = int(spec.param("fock_cutoff"))
    if m < 2:
        raise ValueError("fock_cutoff must be >= 2")
    omega, g = float(spec.param("omega")), float(spec.param("g"))
    a = annihilation(m)
    number_half = np.diag(np.arange(m) + 0.5).astype(complex)
    q = (a + a.conj().T) / np.sqrt(2.0)
    terms = [Term(omega, (i,), (number_half,), f"n{i}") for i in range(spec.N)]
    if g:
        terms += [Term(g, (i, j), (q, q), f"qq{i},{j}") for i, j in _bonds(spec.N, spec.boundary)]
    return terms


def _uniform_doubles(seed: int, n: int) -> np.ndarray:
    """``n`` doubles in ``[0, 1)`` from the raw PCG64 stream: top 53 bits / 2**53.

    Only the bit generator's raw output is used, which numpy keeps stable
    across releases.
    """
    raw = np.random.PCG64(int(seed)).random_raw(n)
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def model_terms(spec: ModelSpec) -> tuple[SiteLayout, list[Term], list[Term]]:
    """Layout and the ``H0`` / ``U`` term lists, without assembling matrices."""
    if spec.kind == "diagonal_random":
        dim = int(spec.param("dim"))
        if dim < 1:
            raise ValueError("dim must be >= 1")
        x = _uniform_doubles(int(spec.param("seed")), 2 * dim)
        h0, u = x[:dim], x[dim:]
        if spec.param("zero_coupling"):
            u = np.zeros(dim)
        layout = SiteLayout((dim,), (0,))
        return (layout, [Term(1.0, (0,), (np.diag(h0).astype(complex),), "H0")],
                [Term(1.0, (0,), (np.diag(u).astype(complex),), "U")])

    builder = {"ising_chain": _ising_terms, "xxz_chain": _xxz_terms,
               "oscillator_chain": _oscillator_terms}[spec.kind]
    local = int(spec.param("fock_cutoff")) if spec.kind == "oscillator_chain" else 2
    layout = SiteLayout.contiguous([local] * spec.N, spec.d)
    h0, u = _split(layout, builder(spec))
    check_block_structure(layout, h0, u)
    return layout, h0, u


def _dense(spec: ModelSpec, kind: str) -> PartitionedHamiltonian:
    if spec.kind != kind:
        raise ValueError(f"spec kind is {spec.kind!r}, expected {kind!r}")
    if spec.dim > MAX_DENSE_DIM:
        raise ModelTooLargeError(
            f"{spec.model_id} has dimension {spec.dim} > {MAX_DENSE_DIM}; "
            "dense diagonalization is refused, use the stochastic backend")
    layout, h0, u = model_terms(spec)
    return PartitionedHamiltonian.from_terms(layout, h0, u)


def build_ising_chain(spec: ModelSpec) -> PartitionedHamiltonian:
    """``H = -J sum Z_i Z_{i+1} - h sum X_i``."""
    return _dense(spec, "ising_chain")


def build_xxz_chain(spec: ModelSpec) -> PartitionedHamiltonian:
    """``H = Jx sum (X_i X_{i+1} + Y_i Y_{i+1}) + Jz sum Z_i Z_{i+1} + h sum Z_i``."""
    return _dense(spec, "xxz_chain")


def build_oscillator_chain(spec: ModelSpec) -> PartitionedHamiltonian:
    """``H = omega sum (n_i + 1/2) + g sum q_i q_{i+1}``, Fock-truncated."""
    return _dense(spec, "oscillator_chain")


def build_diagonal_random(spec: ModelSpec) -> PartitionedHamiltonian:
    """Diagonal ``H0`` and ``U`` with entries uniform on ``[0, 1)``, seeded."""
    return _dense(spec, "diagonal_random")


def build_model(spec: ModelSpec) -> PartitionedHamiltonian:
    return _dense(spec, spec.kind)
