"""Quenched network parameters and the synthetic input ensemble.

Weight matrices are indexed ``w[i, j]``: row ``i`` is the receptive field of
neuron ``i`` in the upper layer. Corresponding synapses of different receptive
fields (same column, different rows) share the correlation ``q``; synapses in
the same receptive field are independent.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import DomainError, ScalingError
from .numerics import RandomSource, robust_cholesky

WeightKind = Literal["binary", "continuous"]
KINDS = ("binary", "continuous")


@dataclass(frozen=True)
class NetworkConfig:
    N: int = 200
    depth: int = 4
    g: float = 0.9
    sigma_b: float = 0.1  # bias variance, not standard deviation
    r: float = 0.0
    kind: WeightKind = "binary"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"weight kind must be one of {KINDS}, got {self.kind!r}")
        if self.N < 1 or self.depth < 0:
            raise DomainError("N must be positive and depth nonnegative")
        if self.g <= 0 or self.sigma_b < 0 or self.r < 0:
            raise DomainError("need g > 0, sigma_b >= 0, r >= 0")
        check_scaling(self.kind, self.N, self.g, self.r)

    @property
    def q(self) -> float:
        return correlation_level(self.kind, self.N, self.r)


def correlation_level(kind: str, N: int, r: float) -> float:
    """Synaptic covariance q from the scaled correlation r."""
    if kind == "binary":
        return r / np.sqrt(N)
    return r / N**1.5


def check_scaling(kind: str, N: int, g: float, r: float) -> None:
    q = correlation_level(kind, N, r)
    if kind == "binary" and not q < 1.0:
        raise ScalingError(f"binary weights need q = r/sqrt(N) < 1; got r={r}, N={N} (q={q:.6g})")
    if kind == "continuous" and q > g * g / N:
        raise ScalingError(
            f"continuous weights need q = r/N^1.5 <= g^2/N, i.e. r <= g^2 sqrt(N) = {g * g * np.sqrt(N):.6g}; got r={r}"
        )


@dataclass(frozen=True)
class LayerParams:
    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        self.weights.setflags(write=False)
        self.biases.setflags(write=False)

    @property
    def N(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class InputEnsembleSpec:
    N: int = 200
    P: int = 400
    sigma: float = 0.5

    def __post_init__(self):
        if self.N < 1 or self.P < 1 or self.sigma <= 0:
            raise DomainError("need N >= 1, P >= 1 and sigma > 0")

    @classmethod
    def from_alpha(cls, N: int, alpha: float, sigma: float = 0.5) -> InputEnsembleSpec:
        return cls(N, int(round(alpha * N)), sigma)

    @property
    def alpha(self) -> float:
        return self.P / self.N


def dg_threshold(q: float) -> float:
    """Latent Gaussian correlation whose sign-thresholding yields correlation q."""
    if not 0.0 <= q < 1.0:
        raise DomainError(f"dichotomized-Gaussian target q must lie in [0, 1), got {q}")
    return float(np.sin(np.pi * q / 2.0))


def exchangeable_columns(n_rows, n_cols, diag, offdiag, rs: RandomSource, method="auto"):
    """An n_rows x n_cols matrix whose columns are i.i.d. zero-mean Gaussian
    vectors with covariance ``diag`` on the diagonal and ``offdiag`` elsewhere.

    ``method="factor"`` uses the shared-factor construction (needs
    0 <= offdiag <= diag); ``"cholesky"`` factors the dense covariance.
    """
    if method == "auto":
        method = "factor" if 0.0 <= offdiag <= diag else "cholesky"
    if method == "factor":
        if not 0.0 <= offdiag <= diag:
            raise DomainError("shared-factor sampling needs 0 <= offdiag <= diag")
        shared = rs.normal(n_cols)
        private = rs.normal((n_rows, n_cols))
        return np.sqrt(offdiag) * shared[None, :] + np.sqrt(diag - offdiag) * private
    if method == "cholesky":
        if n_rows > 1 and offdiag < -diag / (n_rows - 1):
            raise DomainError("exchangeable covariance is not positive semidefinite")
        cov = np.full((n_rows, n_rows), float(offdiag))
        np.fill_diagonal(cov, diag)
        L = robust_cholesky(cov)
        return L @ rs.normal((n_rows, n_cols))
    raise DomainError(f"unknown sampling method {method!r}")


def sample_binary_weights(cfg: NetworkConfig, rs: RandomSource, method="auto") -> np.ndarray:
    if cfg.kind != "binary":
        raise DomainError("configuration is not for binary weights")
    latent_corr = dg_threshold(cfg.q)
    x = exchangeable_columns(cfg.N, cfg.N, 1.0, latent_corr, rs, method)
    return np.where(x >= 0.0, 1.0, -1.0)


def sample_continuous_weights(cfg: NetworkConfig, rs: RandomSource, method="auto") -> np.ndarray:
    if cfg.kind != "continuous":
        raise DomainError("configuration is not for continuous weights")
    check_scaling("continuous", cfg.N, cfg.g, cfg.r)
    return exchangeable_columns(cfg.N, cfg.N, cfg.g**2 / cfg.N, cfg.q, rs, method)


def sample_biases(cfg: NetworkConfig, rs: RandomSource) -> np.ndarray:
    return np.sqrt(cfg.sigma_b) * rs.normal(cfg.N)


def sample_layer(cfg: NetworkConfig, rs: RandomSource) -> LayerParams:
    if cfg.kind == "binary":
        w = sample_binary_weights(cfg, rs.child(0))
    else:
        w = sample_continuous_weights(cfg, rs.child(0))
    return LayerParams(w, sample_biases(cfg, rs.child(1)))


def sample_network(cfg: NetworkConfig, rs: RandomSource) -> list[LayerParams]:
    """``cfg.depth`` layers, layer ``l`` drawn from its own child stream."""
    return [sample_layer(cfg, rs.child(layer)) for layer in range(cfg.depth)]


def sample_patterns(spec: InputEnsembleSpec, rs: RandomSource):
    """Draw xi (N x P) and return it together with Lambda = xi xi^T / N."""
    xi = spec.sigma * rs.normal((spec.N, spec.P))
    lam = xi @ xi.T / spec.N
    return xi, 0.5 * (lam + lam.T)


def sample_inputs(spec: InputEnsembleSpec, count: int, rs: RandomSource):
    """``count`` zero-mean Gaussian inputs with covariance Lambda.

    Returns ``(samples, Lambda)`` with samples of shape (count, N).
    """
    if count < 0:
        raise DomainError("count must be nonnegative")
    xi, lam = sample_patterns(spec, rs.child(0))
    return draw_inputs(xi, lam, count, rs.child(1)), lam


def draw_inputs(xi, lam, count, rs: RandomSource):
    N, P = xi.shape
    if count == 0:
        return np.zeros((0, N))
    if P >= N:
        L = robust_cholesky(lam)
        return rs.normal((count, N)) @ L.T
    # rank-deficient Lambda: xi v / sqrt(N) has covariance Lambda exactly
    return rs.normal((count, P)) @ xi.T / np.sqrt(N)


_MAGIC = b"CSYN"
_HEADER = struct.Struct("<4sIII")


def save_network(path, layers: list[LayerParams], kind: str, step: int | None = None) -> None:
    """Flat little-endian dump: header (magic, kind, N, depth), row-major
    weights per layer, biases per layer, then an optional u64 step counter."""
    N = layers[0].N if layers else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, KINDS.index(kind), N, len(layers)))
        for p in layers:
            fh.write(np.ascontiguousarray(p.weights, dtype="<f8").tobytes())
        for p in layers:
            fh.write(np.ascontiguousarray(p.biases, dtype="<f8").tobytes())
        if step is not None:
            fh.write(struct.pack("<Q", step))


def load_network(path):
    """Inverse of :func:`save_network`; returns ``(layers, kind, step)``."""
    data = Path(path).read_bytes()
    magic, kind, N, depth = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise DomainError(f"{path}: not a network dump")
    off = _HEADER.size
    nw = depth * N * N
    weights = np.frombuffer(data, "<f8", nw, off).reshape(depth, N, N)
    off += nw * 8
    biases = np.frombuffer(data, "<f8", depth * N, off).reshape(depth, N)
    off += depth * N * 8
    step = struct.unpack_from("<Q", data, off)[0] if len(data) - off == 8 else None
    layers = [LayerParams(weights[l].astype(float), biases[l].astype(float)) for l in range(depth)]
    return layers, KINDS[kind], step
