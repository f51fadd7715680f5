"""Deterministic numerical kernels: Gauss-Hermite quadrature against the
standard normal measure, Cholesky factors, symmetric spectra and a seedable
random source."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.linalg import lapack

from .errors import ConvergenceError, DomainError, EvaluationError, NotPositiveDefiniteError

DEFAULT_ORDER = 40
PSI_CLAMP = 1e-12
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights integrating against Dx = exp(-x^2/2) dx / sqrt(2 pi)."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def expect(self, values):
        return float(np.dot(self.weights, values))


@lru_cache(maxsize=None)
def _hermite(order: int):
    x, w = hermegauss(order)
    w = w / np.sqrt(2.0 * np.pi)
    # renormalise away the last-ulp error so the rule integrates 1 exactly
    w = w / w.sum()
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_hermite(order: int = DEFAULT_ORDER) -> QuadratureRule:
    if order < 1:
        raise DomainError(f"quadrature order must be positive, got {order}")
    x, w = _hermite(int(order))
    return QuadratureRule(int(order), x, w)


def gauss_expect_1d(f, rule: QuadratureRule | None = None) -> float:
    """Return the integral of ``f`` against the standard normal measure."""
    rule = rule or gauss_hermite()
    values = np.asarray(f(rule.nodes), dtype=float)
    values = np.broadcast_to(values, rule.nodes.shape)
    bad = ~np.isfinite(values)
    if bad.any():
        node = rule.nodes[np.argmax(bad)]
        raise EvaluationError(f"integrand is not finite at node x={node!r}")
    return rule.expect(values)


def clamp_correlation(psi):
    """Clip |psi| into [-1, 1], tolerating roundoff overshoot up to 1e-12."""
    psi = np.asarray(psi, dtype=float)
    if np.any(np.abs(psi) > 1.0 + PSI_CLAMP) or np.any(np.isnan(psi)):
        raise DomainError(f"correlation coefficient outside [-1, 1]: max |psi| = {np.nanmax(np.abs(psi))!r}")
    return np.clip(psi, -1.0, 1.0)


def gauss_expect_2d(f, psi: float, rule: QuadratureRule | None = None) -> float:
    """E[f(x, psi*x + sqrt(1-psi^2)*y)] for independent standard normals x, y.

    Evaluated on the tensor-product grid of ``rule``; at psi = +-1 the second
    argument collapses to +-x and the rule reduces to a 1-D integral.
    """
    rule = rule or gauss_hermite()
    psi = float(clamp_correlation(psi))
    x = rule.nodes[:, None]
    y = rule.nodes[None, :]
    yp = psi * x + np.sqrt(max(0.0, 1.0 - psi * psi)) * y
    values = np.broadcast_to(np.asarray(f(x, yp), dtype=float), (rule.order, rule.order))
    bad = ~np.isfinite(values)
    if bad.any():
        a, b = np.unravel_index(np.argmax(bad), bad.shape)
        raise EvaluationError(f"integrand is not finite at node (x={rule.nodes[a]!r}, y={rule.nodes[b]!r})")
    return float(rule.weights @ values @ rule.weights)


def cholesky(S, jitter: float = 0.0) -> np.ndarray:
    """Lower-triangular L with L @ L.T = S + jitter * I.

    Raises NotPositiveDefiniteError carrying the zero-based index of the first
    non-positive pivot.
    """
    S = np.array(S, dtype=float, copy=True)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {S.shape}")
    if jitter < 0:
        raise DomainError("jitter must be nonnegative")
    if not np.allclose(S, S.T, rtol=0, atol=1e-12 * max(1.0, np.abs(S).max(initial=0.0))):
        raise DomainError("matrix is not symmetric")
    if S.size == 0:
        return S
    if jitter:
        S[np.diag_indices_from(S)] += jitter
    L, info = lapack.dpotrf(S, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefiniteError(info - 1)
    if info < 0:
        raise DomainError(f"invalid argument {-info} to dpotrf")
    return L


def robust_cholesky(S) -> np.ndarray:
    """Cholesky with one retry at jitter = 1e-10 * max diagonal."""
    try:
        return cholesky(S)
    except NotPositiveDefiniteError:
        scale = float(np.max(np.diag(S))) if len(S) else 0.0
        return cholesky(S, jitter=1e-10 * max(scale, np.finfo(float).tiny))


def sym_eigvals(S) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, in descending order."""
    S = np.asarray(S, dtype=float)
    try:
        vals = np.linalg.eigvalsh(S)
    except np.linalg.LinAlgError as exc:
        # LAPACK's syevd does not expose its iteration count
        raise ConvergenceError(f"symmetric eigensolver did not converge: {exc}") from exc
    return vals[::-1]


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass
class RandomSource:
    """A (seed, stream) addressed random stream.

    Identical (seed, stream) pairs replay identical draws; ``child`` derives
    independent sub-streams deterministically.
    """

    seed: int = 0
    stream: int = 0
    _gen: np.random.Generator | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64 and 0 <= self.stream <= _MASK64):
            raise DomainError("seed and stream must be unsigned 64-bit integers")

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def child(self, index: int) -> RandomSource:
        return RandomSource(self.seed, _splitmix64(self.stream ^ _splitmix64(int(index) + 1)))

    def normal(self, size=None) -> np.ndarray:
        return self.generator.standard_normal(size)


def sample_std_normals(rs: RandomSource, count: int) -> np.ndarray:
    if count < 0:
        raise DomainError("count must be nonnegative")
    return rs.normal(int(count))
