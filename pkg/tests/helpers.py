"""Random instances shared by the property and acceptance suites."""

import numpy as np

from bogobounds import DensityMatrix, HermitianOperator, PartitionedHamiltonian, SiteLayout, kron_embed
from bogobounds.operators import random_hermitian


def random_layout(rng, min_dim=4, max_dim=64):
    while True:
        n = int(rng.integers(2, 7))
        dims = tuple(int(x) for x in rng.choice([2, 3], size=n, p=[0.75, 0.25]))
        if min_dim <= int(np.prod(dims)) <= max_dim:
            break
    return SiteLayout.contiguous(dims, int(rng.integers(2, min(n, 3) + 1)))


def random_partitioned(rng, min_dim=4, max_dim=64, coupling=1.0):
    """Random block Hamiltonians plus a random Hermitian coupling on the full space."""
    layout = random_layout(rng, min_dim, max_dim)
    h0 = np.zeros((layout.dim, layout.dim), dtype=complex)
    for b in range(layout.n_blocks):
        sites = layout.sites_in_block(b)
        local_dim = int(np.prod([layout.site_dims[s] for s in sites]))
        h0 += kron_embed(random_hermitian(rng, local_dim, 2.0), layout, sites).entries
    u = random_hermitian(rng, layout.dim, coupling)
    return PartitionedHamiltonian(layout, HermitianOperator(h0), u)


def random_density(rng, dim, rank=None):
    """Full-rank (or rank-``rank``) density matrix from a complex Wishart draw."""
    k = dim if rank is None else rank
    g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    a = g @ g.conj().T
    return DensityMatrix.from_array(a / np.trace(a).real)


def random_diagonal_instance(rng, dim):
    h0 = rng.uniform(-1, 1, size=dim)
    u = rng.uniform(-1, 1, size=dim)
    return PartitionedHamiltonian.from_operators(HermitianOperator.diag(h0), HermitianOperator.diag(u)), h0, u


# PASS/FAIL lines from the acceptance suite, printed by conftest.py
ACCEPTANCE_LINES: list[str] = []
