import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from corrsyn.errors import DomainError, EvaluationError, NotPositiveDefiniteError
from corrsyn.numerics import (
    RandomSource, cholesky, clamp_correlation, gauss_expect_1d, gauss_expect_2d, gauss_hermite, robust_cholesky,
    sample_std_normals, sym_eigvals,
)


def double_factorial(n):
    return 1 if n <= 0 else n * double_factorial(n - 2)


def test_weights_sum_to_one(rule):
    assert abs(rule.weights.sum() - 1) < 1e-12
    assert np.all(rule.weights > 0)


@given(order=st.integers(1, 40), k=st.integers(0, 79))
@settings(max_examples=80, deadline=None)
def test_moment_exactness(order, k):
    if k > 2 * order - 1:
        return
    rule = gauss_hermite(order)
    got = gauss_expect_1d(lambda x: x**k, rule)
    if k % 2:
        # odd moments cancel between terms as large as E|x|^k; floating point
        # can only promise zero relative to that scale
        scale = rule.expect(np.abs(rule.nodes) ** k)
        assert abs(got) <= 1e-10 * max(1.0, scale)
    else:
        assert abs(got / double_factorial(k - 1) - 1) <= 1e-10


def test_1d_trivial(rule):
    assert gauss_expect_1d(lambda x: np.ones_like(x), rule) == pytest.approx(1, abs=1e-14)
    assert abs(gauss_expect_1d(lambda x: x, rule)) < 1e-14
    assert gauss_expect_1d(lambda x: x * x, rule) == pytest.approx(1, abs=1e-12)


def test_1d_against_adaptive_quadrature(rule):
    f = lambda x: np.tanh(0.9 * x) ** 2
    ref, _ = integrate.quad(lambda x: 2 * f(x) * np.exp(-x * x / 2) / np.sqrt(2 * np.pi), 0, 40, epsabs=1e-14, epsrel=1e-14, limit=500)
    # the poles of tanh at i*pi/1.8 cap the convergence rate: 6.6e-8 at 40 nodes, 6e-10 at 60
    assert abs(gauss_expect_1d(f, rule) - ref) < 1e-7
    assert abs(gauss_expect_1d(f, gauss_hermite(60)) - ref) < 1e-8


def test_1d_nonfinite_names_node(rule):
    with pytest.raises(EvaluationError, match="node"):
        gauss_expect_1d(lambda x: np.where(x > 3, np.inf, x), rule)


def test_2d_trivial(rule):
    assert gauss_expect_2d(lambda x, y: x * y, 0.3, rule) == pytest.approx(0.3, abs=1e-13)
    for psi in (-1.0, -0.4, 0.0, 0.7, 1.0):
        assert gauss_expect_2d(lambda x, y: np.ones_like(x * y), psi, rule) == pytest.approx(1, abs=1e-13)


def test_2d_degenerate_psi(rule):
    f = lambda x, y: np.tanh(x) * np.tanh(0.5 + y)
    one_d_plus = gauss_expect_1d(lambda x: np.tanh(x) * np.tanh(0.5 + x), rule)
    one_d_minus = gauss_expect_1d(lambda x: np.tanh(x) * np.tanh(0.5 - x), rule)
    assert gauss_expect_2d(f, 1.0, rule) == pytest.approx(one_d_plus, abs=1e-13)
    assert gauss_expect_2d(f, -1.0, rule) == pytest.approx(one_d_minus, abs=1e-13)


def test_2d_separable_at_zero(rule):
    a = gauss_expect_1d(lambda x: np.tanh(0.3 + 1.2 * x), rule)
    b = gauss_expect_1d(lambda y: np.cosh(0.4 * y), rule)
    got = gauss_expect_2d(lambda x, y: np.tanh(0.3 + 1.2 * x) * np.cosh(0.4 * y), 0.0, rule)
    assert abs(got - a * b) < 1e-12


def test_2d_psi_domain(rule):
    with pytest.raises(DomainError):
        gauss_expect_2d(lambda x, y: x * y, 1.0 + 1e-9, rule)
    # roundoff overshoot is clamped
    assert gauss_expect_2d(lambda x, y: x * y, 1.0 + 5e-13, rule) == pytest.approx(1.0, abs=1e-12)
    assert clamp_correlation(-1.0 - 1e-13) == -1.0


def test_2d_against_monte_carlo(rule):
    psi, n = 0.5, 10_000_000
    rng = RandomSource(21).generator
    tot, tot2 = 0.0, 0.0
    for _ in range(10):
        x = rng.standard_normal(n // 10)
        y = psi * x + np.sqrt(1 - psi**2) * rng.standard_normal(n // 10)
        v = np.tanh(x) * np.tanh(y)
        tot += v.sum()
        tot2 += (v * v).sum()
    mean = tot / n
    se = np.sqrt((tot2 / n - mean**2) / n)
    got = gauss_expect_2d(lambda x, y: np.tanh(x) * np.tanh(y), psi, rule)
    assert abs(got - mean) < 3 * se


def test_cholesky_closed_forms():
    assert np.array_equal(cholesky(np.eye(3)), np.eye(3))
    L = cholesky([[1.0, 0.5], [0.5, 1.0]])
    np.testing.assert_allclose(L, [[1, 0], [0.5, np.sqrt(0.75)]], atol=1e-15)


def test_cholesky_exchangeable_reconstruction():
    c = np.sin(np.pi * 0.035 / 2)
    S = np.full((50, 50), c)
    np.fill_diagonal(S, 1.0)
    L = cholesky(S)
    assert np.allclose(L, np.tril(L))
    assert np.linalg.norm(L @ L.T - S) / np.linalg.norm(S) < 1e-10
    Lj = cholesky(S, jitter=0.1)
    assert np.linalg.norm(Lj @ Lj.T - S - 0.1 * np.eye(50)) / np.linalg.norm(S) < 1e-10


def test_cholesky_reports_pivot():
    S = np.diag([1.0, 2.0, -1.0, 4.0])
    with pytest.raises(NotPositiveDefiniteError) as exc:
        cholesky(S)
    assert exc.value.pivot == 2
    with pytest.raises(DomainError):
        cholesky([[1.0, 0.2], [0.3, 1.0]])


def test_robust_cholesky_edge():
    # singular exchangeable covariance at the PSD boundary (off-diagonal -1/(n-1))
    n = 6
    S = np.full((n, n), -1.0 / (n - 1))
    np.fill_diagonal(S, 1.0)
    L = robust_cholesky(S)
    assert np.linalg.norm(L @ L.T - S) < 1e-8


def test_sym_eigvals():
    np.testing.assert_allclose(sym_eigvals(np.diag([1.0, 3.0, 2.0])), [3, 2, 1])
    v = np.array([1.0, 2.0, 0.0, 0.0])
    np.testing.assert_allclose(sym_eigvals(np.outer(v, v)), [5, 0, 0, 0], atol=1e-14)
    X = RandomSource(3).normal((20, 40))
    W = X @ X.T
    ev = sym_eigvals(W)
    assert np.all(np.diff(ev) <= 0)
    assert abs(ev.sum() / np.trace(W) - 1) < 1e-8


def test_std_normals():
    assert sample_std_normals(RandomSource(1), 0).shape == (0,)
    a = sample_std_normals(RandomSource(9, 4), 100)
    b = sample_std_normals(RandomSource(9, 4), 100)
    assert np.array_equal(a, b)
    x = sample_std_normals(RandomSource(2), 1_000_000)
    assert abs(x.mean()) < 4 / np.sqrt(1e6)
    assert abs(x.var() - 1) < 0.01
    with pytest.raises(DomainError):
        sample_std_normals(RandomSource(2), -1)


def test_streams_are_distinct_and_reproducible():
    rs = RandomSource(5)
    a, b = rs.child(0).normal(100_000), rs.child(1).normal(100_000)
    assert not np.array_equal(a, b)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(1e5)
    assert np.array_equal(RandomSource(5).child(0).child(3).normal(10), RandomSource(5).child(0).child(3).normal(10))
    with pytest.raises(DomainError):
        RandomSource(-1)
