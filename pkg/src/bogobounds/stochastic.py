"""Matrix-free Hutchinson estimates of Gibbs traces.

``Tr exp(-beta H)`` is estimated as the mean of ``z^T p(H) z`` over
Rademacher probes ``z``, where ``p`` is the Chebyshev interpolant of
``exp(-beta x)`` on an interval enclosing the spectrum. For
``x = a + h (t + 1)`` on ``[a, b]`` the expansion is closed form:

    exp(-beta (x - a)) = ive(0, z) + 2 sum_k (-1)^k ive(k, z) T_k(t),   z = beta h

with ``ive`` the exponentially scaled modified Bessel function, so the
truncation error after degree ``K`` is bounded by the coefficient tail.

Probe ``j`` draws its entries from a stream keyed by ``(seed, j)``, and
probes are processed in fixed-size chunks, so results do not depend on
the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.special

from .operators import HermitianOperator, SiteLayout
from .terms import Term, assemble_sparse

CHEBYSHEV_TOL = 1e-8
MAX_DEGREE = 2000
INTERVAL_WIDENING = 0.05
PROBE_CHUNK = 16


class IllConditionedRatio(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class MatVecOracle:
    """``H @ v`` for vectors or column blocks, plus an operator-norm bound."""

    dim: int
    apply: Callable[[np.ndarray], np.ndarray]
    norm_bound: float | None = None

    @classmethod
    def from_terms(cls, terms: Sequence[Term], layout: SiteLayout, *, check: bool = True) -> MatVecOracle:
        m = assemble_sparse(terms, layout)
        oracle = cls(layout.dim, m.__matmul__, float(sum(t.norm_bound() for t in terms)))
        if check:
            oracle.check_hermitian()
        return oracle

    @classmethod
    def from_operator(cls, op: HermitianOperator) -> MatVecOracle:
        m = sp.csr_matrix(op.entries)
        return cls(op.dim, m.__matmul__, float(np.linalg.norm(op.entries, 2)))

    def check_hermitian(self, pairs: int = 10, seed: int = 0, tol: float = 1e-10) -> None:
        """Statistical check of ``<u, Hv> = conj(<v, Hu>)`` on random pairs."""
        rng = np.random.default_rng(seed)
        for _ in range(pairs):
            u = rng.normal(size=self.dim) + 1j * rng.normal(size=self.dim)
            v = rng.normal(size=self.dim) + 1j * rng.normal(size=self.dim)
            hu, hv = self.apply(u), self.apply(v)
            lhs, rhs = np.vdot(u, hv), np.conj(np.vdot(v, hu))
            scale = max(1.0, np.linalg.norm(u) * np.linalg.norm(hv))
            if abs(lhs - rhs) > tol * scale:
                raise ValueError(f"matvec oracle is not Hermitian: |<u,Hv> - <Hu,v>| = {abs(lhs - rhs):.3e}")


@dataclass(frozen=True)
class StochasticEstimate:
    value: float
    stderr: float
    probes: int
    degree: int
    bias_bound: float = 0.0  # certified bound on the Chebyshev truncation error

    def __post_init__(self):
        if self.probes < 2:
            raise ValueError("need at least two probes")
        if not self.stderr >= 0:
            raise ValueError("stderr must be non-negative")
        if not self.bias_bound >= 0:
            raise ValueError("bias_bound must be non-negative")

    def agrees_with(self, exact: float, sigmas: float = 3.0) -> bool:
        """``|value - exact| <= sigmas * stderr + bias_bound``."""
        return abs(self.value - exact) <= sigmas * self.stderr + self.bias_bound


def _lanczos_extremes(oracle: MatVecOracle, steps: int, seed: int):
    rng = np.random.default_rng(seed)
    n = oracle.dim
    q = rng.normal(size=n) + 0j
    q /= np.linalg.norm(q)
    basis = [q]
    alphas, betas = [], []
    for _ in range(min(steps, n)):
        w = oracle.apply(basis[-1])
        alpha = float(np.vdot(basis[-1], w).real)
        w = w - alpha * basis[-1] - (betas[-1] * basis[-2] if betas else 0)
        qs = np.array(basis)
        w = w - qs.T @ (qs.conj() @ w)  # full reorthogonalization
        alphas.append(alpha)
        b = float(np.linalg.norm(w))
        if b < 1e-12 * max(1.0, abs(alpha)) or len(basis) == n:
            betas.append(0.0)
            break
        betas.append(b)
        basis.append(w / b)
    k = len(alphas)
    theta, y = scipy.linalg.eigh_tridiagonal(np.array(alphas), np.array(betas[: k - 1]))
    resid = abs(betas[k - 1]) * np.abs(y[-1, :])
    return theta[0], resid[0], theta[-1], resid[-1]


def spectral_interval(oracle: MatVecOracle, *, steps: int = 80, seed: int = 0) -> tuple[float, float]:
    """Interval enclosing the spectrum of the oracle's operator.

    Extreme Ritz values from a reorthogonalized Lanczos run are pushed out
    by their residual norms and then by 5% of the spread. When Lanczos
    fails, the term-norm bound (widened by 5%) is used instead.
    """
    try:
        with np.errstate(invalid="ignore", divide="ignore"):
            lo, r_lo, hi, r_hi = _lanczos_extremes(oracle, steps, seed)
        ok = all(np.isfinite([lo, r_lo, hi, r_hi]))
    except (np.linalg.LinAlgError, ValueError):
        ok = False
    if not ok:
        if oracle.norm_bound is None:
            raise ArithmeticError("spectral interval failed and no norm bound is available")
        nb = (1.0 + INTERVAL_WIDENING) * oracle.norm_bound
        return -nb, nb
    # the small absolute term covers Ritz values rounded just inside a degenerate spectrum
    pad = INTERVAL_WIDENING * (hi - lo) + 8 * np.finfo(float).eps * max(abs(lo), abs(hi))
    lo, hi = lo - r_lo - pad, hi + r_hi + pad
    if oracle.norm_bound is not None:
        lo, hi = max(lo, -oracle.norm_bound), min(hi, oracle.norm_bound)
    return float(lo), float(hi)


def chebyshev_exp_coefficients(z: float, degree: int | None = None, *,
                               tol: float = CHEBYSHEV_TOL) -> np.ndarray:
    """Chebyshev coefficients of ``exp(-z (t + 1))`` on ``[-1, 1]``.

    With ``degree=None`` the smallest degree whose coefficient tail is
    below ``tol`` is chosen; an explicit degree is checked against the same
    bound.
    """
    return _exp_series(z, degree, tol)[0]


def _exp_series(z: float, degree: int | None, tol: float) -> tuple[np.ndarray, float]:
    """Coefficients plus the sup-norm error bound ``sum_{k > degree} |c_k|``."""
    if z < 0:
        raise ValueError("z must be non-negative")
    if z == 0:
        return np.array([1.0]), 0.0
    k = np.arange(MAX_DEGREE + 400)
    c = scipy.special.ive(k, z)
    c[1:] *= 2.0
    c[1::2] *= -1.0
    tail = np.cumsum(np.abs(c)[::-1])[::-1]  # tail[j] = sum_{k >= j} |c_k|
    if degree is None:
        ok = np.nonzero(tail[1:] < tol)[0]
        if not ok.size or ok[0] > MAX_DEGREE:
            raise ValueError(f"Chebyshev degree needed for z={z:.3g} exceeds the cap {MAX_DEGREE}")
        degree = int(ok[0])
    elif not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"degree must be in [0, {MAX_DEGREE}]")
    elif tail[degree + 1] >= tol:
        raise ValueError(f"degree {degree} leaves Chebyshev error {tail[degree + 1]:.2e} >= {tol:g}")
    return c[: degree + 1].copy(), float(tail[degree + 1])


def _rademacher_block(seed: int, start: int, stop: int, dim: int) -> np.ndarray:
    cols = [np.random.default_rng([seed, j]).integers(0, 2, size=dim) * 2.0 - 1.0
            for j in range(start, stop)]
    return np.stack(cols, axis=1)


def _chebyshev_apply(apply, x: np.ndarray, coeffs: np.ndarray, center: float, half: float) -> np.ndarray:
    """``p(H) X`` by the three-term recurrence on ``(H - center) / half``."""
    out = coeffs[0] * x
    if len(coeffs) == 1:
        return out
    prev, cur = x, (apply(x) - center * x) / half
    out = out + coeffs[1] * cur
    for c in coeffs[2:]:
        prev, cur = cur, 2.0 * (apply(cur) - center * cur) / half - prev
        out = out + c * cur
    return out


class _GibbsPolynomial:
    """``exp(-beta (H - a))`` as a Chebyshev polynomial on ``[a, b]``."""

    def __init__(self, oracle: MatVecOracle, beta: float, degree: int | None, seed: int):
        if not beta >= 0:
            raise ValueError("beta must be non-negative")
        self.oracle = oracle
        self.a, b = spectral_interval(oracle, seed=seed)
        self.half = 0.5 * (b - self.a)
        self.center = self.a + self.half
        self.coeffs, self.tail = _exp_series(beta * self.half, degree, CHEBYSHEV_TOL)
        self.log_scale = -beta * self.a  # Tr exp(-beta H) = e^log_scale * Tr p(H)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return _chebyshev_apply(self.oracle.apply, x, self.coeffs, self.center, self.half)


def _map_chunks(fn, probes: int, workers: int):
    chunks = [(s, min(s + PROBE_CHUNK, probes)) for s in range(0, probes, PROBE_CHUNK)]
    if workers <= 1:
        parts = [fn(s, e) for s, e in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda se: fn(*se), chunks))
    return [np.concatenate(p) for p in zip(*parts)]


def estimate_trace_exp(oracle: MatVecOracle, beta: float, probes: int = 32, degree: int | None = None,
                       *, seed: int = 0, workers: int = 1) -> StochasticEstimate:
    """Hutchinson estimate of ``Tr exp(-beta H)``."""
    if probes < 2:
        raise ValueError("need at least two probes")
    poly = _GibbsPolynomial(oracle, beta, degree, seed)

    def chunk(start, stop):
        z = _rademacher_block(seed, start, stop, oracle.dim)
        return (np.sum(z * poly(z), axis=0).real,)

    (samples,) = _map_chunks(chunk, probes, workers)
    scale = math.exp(poly.log_scale)
    return StochasticEstimate(
        value=scale * float(np.mean(samples)),
        stderr=scale * float(np.std(samples, ddof=1)) / math.sqrt(probes),
        probes=probes,
        degree=poly.degree,
        bias_bound=scale * oracle.dim * poly.tail,
    )


def _ratio_estimate(num: np.ndarray, den: np.ndarray, degree: int,
                    num_bias: float = 0.0, den_bias: float = 0.0) -> StochasticEstimate:
    m = len(num)
    n_bar, d_bar = float(np.mean(num)), float(np.mean(den))
    cov = np.cov(np.vstack([num, den]), ddof=1)
    d_err = math.sqrt(max(cov[1, 1], 0.0) / m)
    if abs(d_bar) <= 3.0 * d_err:
        raise IllConditionedRatio(f"denominator {d_bar:.3e} is within 3 stderr ({d_err:.3e}) of zero")
    r = n_bar / d_bar
    var = (cov[0, 0] - 2.0 * r * cov[0, 1] + r * r * cov[1, 1]) / (m * d_bar * d_bar)
    if num_bias or den_bias:
        bias = (num_bias + abs(r) * den_bias) / max(abs(d_bar) - den_bias, np.finfo(float).tiny)
    else:
        bias = 0.0
    return StochasticEstimate(r, math.sqrt(max(var, 0.0)), m, degree, bias)


def _model_parts(model):
    """``(layout, h0_terms, u_terms)`` from a PartitionedHamiltonian or a term triple."""
    if isinstance(model, tuple):
        return model
    if model.h0_terms or model.u_terms:
        return model.layout, list(model.h0_terms), list(model.u_terms)
    layout = model.layout
    wrap = SiteLayout((layout.dim,), (0,))
    return (wrap, [Term(1.0, (0,), (model.H0.entries,), "H0")],
            [Term(1.0, (0,), (model.U.entries,), "U")])


def _weighted_coupling(weight: MatVecOracle, coupling: MatVecOracle, beta: float, probes: int,
                       degree: int | None, seed: int, workers: int) -> StochasticEstimate:
    poly = _GibbsPolynomial(weight, beta, degree, seed)

    def chunk(start, stop):
        z = _rademacher_block(seed, start, stop, weight.dim)
        pz = poly(z)
        den = np.sum(z * pz, axis=0).real
        num = np.sum(pz.conj() * coupling.apply(z), axis=0).real
        return num, den

    num, den = _map_chunks(chunk, probes, workers)
    # |Tr((p - f)(H) U)| <= dim * tail * ||U||, |Tr (p - f)(H)| <= dim * tail
    den_bias = weight.dim * poly.tail
    num_bias = den_bias * (coupling.norm_bound if coupling.norm_bound is not None else math.inf)
    return _ratio_estimate(num, den, poly.degree, num_bias, den_bias)


def estimate_bound_upper(model, beta: float, probes: int = 32, degree: int | None = None,
                         *, seed: int = 0, workers: int = 1) -> StochasticEstimate:
    """``E_rho0[U] = Tr(exp(-beta H0) U) / Tr exp(-beta H0)`` with shared probes."""
    if probes < 2:
        raise ValueError("need at least two probes")
    layout, h0, u = _model_parts(model)
    if not u:
        return StochasticEstimate(0.0, 0.0, probes, 0)
    return _weighted_coupling(MatVecOracle.from_terms(h0, layout), MatVecOracle.from_terms(u, layout),
                              beta, probes, degree, seed, workers)


def estimate_bound_lower(model, beta: float, probes: int = 32, degree: int | None = None,
                         *, seed: int = 0, workers: int = 1) -> StochasticEstimate:
    """``E_rho[U] = Tr(exp(-beta H) U) / Tr exp(-beta H)`` with ``H = H0 + U``."""
    if probes < 2:
        raise ValueError("need at least two probes")
    layout, h0, u = _model_parts(model)
    if not u:
        return StochasticEstimate(0.0, 0.0, probes, 0)
    return _weighted_coupling(MatVecOracle.from_terms(h0 + u, layout), MatVecOracle.from_terms(u, layout),
                              beta, probes, degree, seed, workers)
