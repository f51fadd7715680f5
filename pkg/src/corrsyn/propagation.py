"""Propagation of activity statistics through a fixed network.

Two routes: the Gaussian mean-field moment iteration (mean vector and full
covariance, layer by layer) and brute-force propagation of input samples.
Activations are tanh throughout; binary weights carry a g/sqrt(N) prefactor
in the pre-activation, continuous weights do not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import LayerParams, NetworkConfig
from .errors import DegenerateCovarianceError, DomainError, PropagationError
from .numerics import PSI_CLAMP, QuadratureRule, gauss_hermite

NEG_DELTA_TOL = 1e-8


@dataclass(frozen=True)
class ActivityMoments:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def N(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class PreActivationStats:
    z0: np.ndarray  # mean pre-activation, bias included
    delta: np.ndarray  # covariance of the mean-subtracted pre-activation


def weight_scale(kind: str, g: float, N: int) -> float:
    return g / np.sqrt(N) if kind == "binary" else 1.0


def preactivation_stats(params: LayerParams, prev: ActivityMoments, kind: str, g: float) -> PreActivationStats:
    w = params.weights
    if w.shape[1] != prev.N or prev.cov.shape != (prev.N, prev.N):
        raise DomainError(f"weight matrix {w.shape} does not match activity of width {prev.N}")
    a = weight_scale(kind, g, w.shape[1])
    z0 = a * (w @ prev.mean) + params.biases
    delta = (a * a) * (w @ prev.cov @ w.T)
    return PreActivationStats(z0, 0.5 * (delta + delta.T))


def gaussian_tanh_moments(z0, delta, rule: QuadratureRule | None = None) -> ActivityMoments:
    """Mean and covariance of tanh(a + z0) for a ~ N(0, delta).

    Every covariance entry, diagonal included, is the two-point integral with
    psi = delta_ij / sqrt(delta_ii delta_jj); on the diagonal psi = 1 and the
    integral reduces to E[tanh^2] without a separate branch.
    """
    rule = rule or gauss_hermite()
    z0 = np.asarray(z0, dtype=float)
    delta = np.asarray(delta, dtype=float)
    d = np.diag(delta).copy()
    if np.any(d < -NEG_DELTA_TOL):
        i = int(np.argmin(d))
        raise PropagationError(f"pre-activation variance delta[{i},{i}] = {d[i]!r} is negative")
    # Which neuron of a pair plays the outer variable changes the quadrature
    # error slightly; fixing the orientation by value (not by index) keeps the
    # result exactly equivariant under relabelling of neurons.
    order = np.lexsort((z0, d))
    mean, cov = _tanh_moments_ordered(z0[order], delta[np.ix_(order, order)], rule)
    inv = np.argsort(order)
    return ActivityMoments(mean[inv], cov[np.ix_(inv, inv)])


def _tanh_moments_ordered(z0, delta, rule):
    t, wq = rule.nodes, rule.weights
    N = len(z0)
    s = np.sqrt(np.clip(np.diag(delta), 0.0, None))

    A = np.tanh(s[:, None] * t[None, :] + z0[:, None])
    m = A @ wq

    with np.errstate(divide="ignore", invalid="ignore"):
        psi = delta / np.outer(s, s)
    psi[~np.isfinite(psi)] = 0.0
    np.fill_diagonal(psi, 1.0)
    over = np.abs(psi) > 1.0 + PSI_CLAMP
    if over.any():
        i, j = np.argwhere(over)[0]
        raise PropagationError(f"pre-activation correlation psi = {psi[i, j]!r} exceeds 1 (between neurons with variances {s[i]**2!r}, {s[j]**2!r})")
    np.clip(psi, -1.0, 1.0, out=psi)
    comp = np.sqrt(1.0 - psi * psi)

    # centred products: E[tanh^2] - m^2 cancels catastrophically when delta is tiny
    C = np.empty((N, N))
    wA = (A - m[:, None]) * wq[None, :]
    for i in range(N):
        sj = s[i:]
        u = (sj * psi[i, i:])[:, None] * t[None, :]
        v = (sj * comp[i, i:])[:, None] * t[None, :] + z0[i:, None]
        B = np.tanh(u[:, :, None] + v[:, None, :]) - m[i:, None, None]
        C[i, i:] = (B @ wq) @ wA[i]
    iu = np.triu_indices(N, 1)
    C[iu[1], iu[0]] = C[iu]
    return m, C


def moment_step(params: LayerParams, prev: ActivityMoments, cfg: NetworkConfig, rule: QuadratureRule | None = None) -> ActivityMoments:
    pre = preactivation_stats(params, prev, cfg.kind, cfg.g)
    return gaussian_tanh_moments(pre.z0, pre.delta, rule)


def propagate_moments(net, init: ActivityMoments, cfg: NetworkConfig, rule: QuadratureRule | None = None) -> list[ActivityMoments]:
    """Mean-field moments after each layer of ``net`` (input excluded)."""
    out = []
    cur = init
    for params in net:
        cur = moment_step(params, cur, cfg, rule)
        out.append(cur)
    return out


def forward(params: LayerParams, h, kind: str, g: float):
    """One layer applied to a batch ``h`` of shape (S, N)."""
    a = weight_scale(kind, g, params.weights.shape[1])
    return np.tanh(a * (h @ params.weights.T) + params.biases)


def propagate_samples(net, inputs, cfg: NetworkConfig) -> list[np.ndarray]:
    """Activations at every layer for a batch of inputs (rows are samples)."""
    h = np.asarray(inputs, dtype=float)
    if net and h.shape[1] != net[0].weights.shape[1]:
        raise DomainError(f"inputs have width {h.shape[1]}, network expects {net[0].weights.shape[1]}")
    out = []
    for params in net:
        h = forward(params, h, cfg.kind, cfg.g)
        out.append(h)
    return out


def moments_from_samples(batch) -> ActivityMoments:
    """Sample mean and unbiased (S - 1) covariance."""
    batch = np.asarray(batch, dtype=float)
    S = batch.shape[0]
    if S < 2:
        raise DegenerateCovarianceError(f"need at least 2 samples, got {S}")
    mean = batch.mean(axis=0)
    x = batch - mean
    cov = x.T @ x / (S - 1)
    return ActivityMoments(mean, 0.5 * (cov + cov.T))


class _MomentAccumulator:
    def __init__(self, N):
        self.count = 0
        self.total = np.zeros(N)
        self.outer = np.zeros((N, N))

    def add(self, x):
        self.count += x.shape[0]
        self.total += x.sum(axis=0)
        self.outer += x.T @ x

    def moments(self) -> ActivityMoments:
        S = self.count
        if S < 2:
            raise DegenerateCovarianceError(f"need at least 2 samples, got {S}")
        mean = self.total / S
        cov = (self.outer - S * np.outer(mean, mean)) / (S - 1)
        return ActivityMoments(mean, 0.5 * (cov + cov.T))


def sample_moments(net, inputs, cfg: NetworkConfig, chunk: int = 20000) -> list[ActivityMoments]:
    """Empirical moments at each layer, streaming the batch in chunks so that
    only one chunk of activations is held in memory."""
    inputs = np.asarray(inputs, dtype=float)
    accs = [_MomentAccumulator(inputs.shape[1]) for _ in net]
    for start in range(0, inputs.shape[0], chunk):
        h = inputs[start:start + chunk]
        for params, acc in zip(net, accs):
            h = forward(params, h, cfg.kind, cfg.g)
            acc.add(h)
    return [acc.moments() for acc in accs]
