"""Product-operator terms on a site layout.

A Hamiltonian is kept as a list of terms ``coeff * A_s1 (x) A_s2 (x) ...``
so it can be assembled densely, sparsely, or checked structurally against
the block partition before any matrix is formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .operators import HermitianOperator, SiteLayout


@dataclass(frozen=True, eq=False)
class Term:
    coeff: float
    sites: tuple[int, ...]
    factors: tuple[np.ndarray, ...]
    label: str = ""

    def __post_init__(self):
        if len(self.sites) != len(self.factors):
            raise ValueError("one factor per site")
        if len(set(self.sites)) != len(self.sites):
            raise ValueError(f"term sites must be distinct: {self.sites}")

    def scaled(self, s: float) -> Term:
        return Term(self.coeff * s, self.sites, self.factors, self.label)

    def norm_bound(self) -> float:
        """Upper bound on the operator norm of the term."""
        return abs(self.coeff) * float(np.prod([np.linalg.norm(f, 2) for f in self.factors]))

    def _site_factor(self, site_dims: Sequence[int]) -> list:
        lookup = dict(zip(self.sites, self.factors))
        return [lookup.get(s) for s in range(len(site_dims))]


def _check_sites(term: Term, layout: SiteLayout):
    for s, f in zip(term.sites, term.factors):
        if not 0 <= s < layout.n_sites:
            raise ValueError(f"term {term.label!r} acts on site {s} outside the layout")
        if f.shape != (layout.site_dims[s],) * 2:
            raise ValueError(f"term {term.label!r}: factor on site {s} has shape {f.shape}")


def assemble_dense(terms: Iterable[Term], layout: SiteLayout) -> HermitianOperator:
    dims = layout.site_dims
    total = np.zeros((layout.dim, layout.dim), dtype=complex)
    for term in terms:
        _check_sites(term, layout)
        m = np.ones((1, 1), dtype=complex)
        for f, d in zip(term._site_factor(dims), dims):
            m = np.kron(m, np.eye(d) if f is None else f)
        total += term.coeff * m
    return HermitianOperator(total)


def assemble_sparse(terms: Iterable[Term], layout: SiteLayout) -> sp.csr_matrix:
    dims = layout.site_dims
    total = sp.csr_matrix((layout.dim, layout.dim), dtype=complex)
    for term in terms:
        _check_sites(term, layout)
        m = sp.identity(1, dtype=complex, format="csr")
        for f, d in zip(term._site_factor(dims), dims):
            m = sp.kron(m, sp.identity(d, format="csr") if f is None else sp.csr_matrix(f), format="csr")
        total = total + term.coeff * m
    total.sum_duplicates()
    return total.tocsr()


def crosses_blocks(term: Term, layout: SiteLayout) -> bool:
    return len(layout.blocks_touched(term.sites)) > 1
