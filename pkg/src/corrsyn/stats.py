"""Order parameters of a covariance matrix and spectral tools for the input
ensemble."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateCovarianceError, DomainError
from .numerics import sym_eigvals
from .propagation import ActivityMoments


@dataclass(frozen=True)
class LayerSummary:
    D: float
    D_tilde: float
    K1: float
    K2: float
    Q: float
    N_sigma: float

    def as_dict(self):
        return asdict(self)


def participation_ratio(C):
    """(D, D/N) with D = tr(C)^2 / tr(C^2), computed from traces only."""
    C = np.asarray(C, dtype=float)
    tr = np.trace(C)
    tr2 = np.sum(C * C)  # tr(C^2) for symmetric C
    if not tr > 0 or tr2 == 0:
        raise DegenerateCovarianceError(f"degenerate covariance: trace={tr!r}, trace of square={tr2!r}")
    D = tr * tr / tr2
    return float(D), float(D / C.shape[0])


def layer_summary(mom: ActivityMoments) -> LayerSummary:
    C = np.asarray(mom.cov, dtype=float)
    N = C.shape[0]
    diag = np.diag(C)
    K1 = diag.mean()
    K2 = np.mean(diag**2)
    N_sigma = (np.sum(C * C) - np.sum(diag**2)) / N
    Q = float(np.mean(mom.mean**2))
    D, D_tilde = participation_ratio(C)
    return LayerSummary(D, D_tilde, float(K1), float(K2), Q, float(N_sigma))


def mp_edges(alpha: float, sigma: float):
    """Support (sigma^2 lambda_-, sigma^2 lambda_+) with lambda_pm = (sqrt(alpha) pm 1)^2."""
    return sigma**2 * (np.sqrt(alpha) - 1.0) ** 2, sigma**2 * (np.sqrt(alpha) + 1.0) ** 2


def mp_density(lam, alpha: float, sigma: float):
    """Eigenvalue density of Lambda = xi xi^T / N for alpha = P/N > 1."""
    if not alpha > 1:
        raise DomainError(f"spectral density is only modelled for alpha > 1, got {alpha}")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    lo, hi = mp_edges(alpha, sigma)
    lam = np.asarray(lam, dtype=float)
    inside = (lam > lo) & (lam < hi)
    safe = np.where(inside, lam, 1.0)
    rho = np.where(inside, np.sqrt(np.abs((hi - safe) * (safe - lo))) / (2 * np.pi * sigma**2 * safe), 0.0)
    return rho if rho.ndim else float(rho)


def mp_normalized_dim(alpha: float) -> float:
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if np.isinf(alpha):
        return 1.0
    return alpha / (alpha + 1.0)


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    bin_edges: np.ndarray
    density: np.ndarray
    theory: np.ndarray  # mp_density at bin centers
    support: tuple
    distance: float

    @property
    def centers(self):
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])


def spectrum_report(Lambda, alpha: float, sigma: float, bins: int = 50) -> SpectrumReport:
    """Histogram the spectrum of Lambda on [0, 1.1 sigma^2 lambda_+] and
    compare it with the theoretical density at bin centers (L1 distance)."""
    lo, hi = mp_edges(alpha, sigma)
    evals = sym_eigvals(Lambda)
    edges = np.linspace(0.0, 1.1 * hi, bins + 1)
    counts, _ = np.histogram(evals, bins=edges)
    width = np.diff(edges)
    # normalise by the full count so mass outside the window shows up as error
    density = counts / (len(evals) * width)
    centers = 0.5 * (edges[1:] + edges[:-1])
    theory = mp_density(centers, alpha, sigma)
    distance = float(np.sum(np.abs(density - theory) * width))
    return SpectrumReport(evals, edges, density, theory, (lo, hi), distance)
