"""Large-N recursions for the layer order parameters.

A layer is summarised by K1 (mean variance), K2 (mean squared variance),
Q (mean squared activity), N*Sigma (aggregate squared off-diagonal
covariance) and the normalised dimensionality D~ = K1^2 / (N Sigma + K2).
One step maps these scalars of layer l to layer l+1 through three
disorder-averaged slope coefficients of tanh. With

    F(s) = (E_x phi'(a x + sqrt(v) s))^2,   a^2 = g^2 K1,  v = g^2 Q + sigma_b,

they are Kii = E[F(s)], Kii2 = E[F(s)^2] and Kij2 = E[F(s1) F(s2)], where
(s1, s2) are standard normals whose correlation comes from the synaptic
correlation rho acting on the mean-activity part g^2 Q of v. The "plain"
variants drop the thermal smoothing a from the diagonal slopes:
Kii = E[phi'(sqrt(v) s)^2], Kii2 = E[phi'(sqrt(v) s)^4].
gamma1 = Kij2 / Kii^2 and gamma2 = Kii2 / Kii^2 tune the next dimensionality
multiplicatively and additively.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .ensemble import KINDS, check_scaling, correlation_level
from .errors import DegenerateCovarianceError, DomainError, ScalingError
from .numerics import QuadratureRule, gauss_hermite
from .propagation import ActivityMoments, gaussian_tanh_moments, preactivation_stats
from .stats import layer_summary

NAN = float("nan")
DIAG_MODES = ("full", "delta", "plain")


def dphi(x):
    return 1.0 / np.cosh(x) ** 2


@dataclass(frozen=True)
class TheoryConfig:
    N: int = 200
    g: float = 0.9
    sigma_b: float = 0.1
    r: float = 0.0
    kind: str = "binary"
    small_g_mode: bool = False
    # which diagonal slopes keep the pre-activation variance a^2 = g^2 K1:
    # "full" both Kii and Kii2, "delta" only Kii2, "plain" neither
    diag_mode: str = "full"
    exact_affine: bool = False  # keep the (1 +- q^2) factors in the Sigma map

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown weight kind {self.kind!r}")
        if self.diag_mode not in DIAG_MODES:
            raise DomainError(f"diag_mode must be one of {DIAG_MODES}, got {self.diag_mode!r}")
        if self.g < 0 or self.sigma_b < 0 or self.r < 0:
            raise DomainError("need g >= 0, sigma_b >= 0, r >= 0")
        if self.g > 0:
            check_scaling(self.kind, self.N, self.g, self.r)

    @property
    def q(self) -> float:
        return correlation_level(self.kind, self.N, self.r)

    @property
    def rho(self) -> float:
        """Correlation between the mean-field inputs of two neurons."""
        if self.kind == "binary":
            return self.q
        return self.q * self.N / self.g**2


@dataclass(frozen=True)
class TheoryState:
    K1: float
    K2: float
    Q: float
    N_sigma: float
    D_tilde: float
    gamma1: float = NAN
    gamma2: float = NAN
    kappa: float = NAN
    additive: float = NAN
    layer: int = 0

    @property
    def D_tilde_identity(self) -> float:
        """K1^2 / (N Sigma + K2) from this layer's own scalars."""
        return self.K1**2 / (self.N_sigma + self.K2)

    def as_dict(self):
        return asdict(self)


def initial_state(mom: ActivityMoments) -> TheoryState:
    """Layer-0 scalars read directly off a covariance (and mean)."""
    s = layer_summary(mom)
    return TheoryState(s.K1, s.K2, s.Q, s.N_sigma, s.D_tilde, layer=0)


def state_from_covariance(cov) -> TheoryState:
    cov = np.asarray(cov, dtype=float)
    return initial_state(ActivityMoments(np.zeros(cov.shape[0]), cov))


def _slope_profile(a, sd, rule):
    """F(s) = E_x phi'(a x + sd s) for an array of s."""
    t, w = rule.nodes, rule.weights

    def F(s):
        s = np.asarray(s, dtype=float)
        return dphi(a * t + sd * s[..., None]) @ w

    return F


def k_coefficients(state: TheoryState, cfg: TheoryConfig, rule: QuadratureRule | None = None):
    """Return (Kii, Kii2, Kij2) for the layer following ``state``."""
    rule = rule or gauss_hermite()
    rho = cfg.rho
    if abs(rho) > 1.0:
        raise ScalingError(f"pre-activation correlation rho = {rho:.6g} exceeds 1; synaptic correlation too strong")
    t, w = rule.nodes, rule.weights
    g2 = cfg.g**2
    v = g2 * state.Q + cfg.sigma_b
    a = np.sqrt(max(g2 * state.K1, 0.0))
    sd = np.sqrt(v)

    plain = dphi(sd * t)
    F = _slope_profile(a, sd, rule)
    Fn = F(t) ** 2  # (E_x phi')^2 at the outer nodes
    Kii = float(w @ (Fn if cfg.diag_mode == "full" else plain**2))
    Kii2 = float(w @ (plain**4 if cfg.diag_mode == "plain" else Fn**2))

    rho_eff = rho * g2 * state.Q / v if v > 0 else 0.0
    if rho_eff == 0.0:
        Fbar = float(w @ Fn)
        Kij2 = Fbar * Fbar
    else:
        s2 = rho_eff * t[:, None] + np.sqrt(1.0 - rho_eff**2) * t[None, :]
        Kij2 = float(w @ (Fn[:, None] * F(s2) ** 2) @ w)
    return Kii, Kii2, Kij2


def sigma_map(state: TheoryState, cfg: TheoryConfig, kappa: float):
    """(slope, intercept) of the affine map N Sigma^l -> N Sigma^{l+1}."""
    if kappa < 0:
        raise DomainError("kappa must be nonnegative")
    g4, r2, K1, K2 = cfg.g**4, cfg.r**2, state.K1, state.K2
    if cfg.kind == "binary":
        if cfg.exact_affine:
            q2 = cfg.q**2
            return g4 * kappa * (1 + q2), g4 * kappa * ((1 - q2) * K2 + q2 * cfg.N * K1 * K1)
        return g4 * kappa, g4 * kappa * (K2 + r2 * K1 * K1)
    if cfg.exact_affine:
        q2, N = cfg.q**2, cfg.N
        c = g4 + N * N * q2
        return kappa * c, kappa * (c * K2 + q2 * N**3 * K1 * K1)
    return kappa * g4, kappa * (g4 * K2 + r2 * K1 * K1)


def sigma_step(state: TheoryState, cfg: TheoryConfig, kappa: float) -> float:
    slope, intercept = sigma_map(state, cfg, kappa)
    return slope * state.N_sigma + intercept


def operating_point(state: TheoryState, cfg: TheoryConfig, kappa: float) -> float:
    """Fixed point of the Sigma map at frozen K1, K2 and kappa."""
    slope, intercept = sigma_map(state, cfg, kappa)
    if not slope < 1.0:
        raise DomainError(f"Sigma map is not contractive (slope g^4 kappa = {slope:.6g} >= 1); no operating point")
    return intercept / (1.0 - slope)


def additive_term(K1, gamma1, gamma2, cfg: TheoryConfig) -> float:
    r2 = cfg.r**2
    if cfg.kind == "continuous":
        r2 = r2 / cfg.g**4
    return (gamma1 * r2 + gamma2) * K1 * K1


def next_dimension(K1, K2, N_sigma, gamma1, gamma2, cfg: TheoryConfig) -> float:
    """D~ of the next layer from this layer's scalars and the gamma ratios."""
    return K1 * K1 / (gamma1 * (N_sigma + K2) + additive_term(K1, gamma1, gamma2, cfg))


def theory_step(state: TheoryState, cfg: TheoryConfig, rule: QuadratureRule | None = None) -> TheoryState:
    rule = rule or gauss_hermite()
    if cfg.g == 0:
        raise DegenerateCovarianceError("g = 0 leaves no variance in the next layer; dimensionality undefined")
    Kii, Kii2, Kij2 = k_coefficients(state, cfg, rule)
    gamma1 = Kij2 / Kii**2
    gamma2 = Kii2 / Kii**2
    N_sigma = sigma_step(state, cfg, Kij2)
    additive = additive_term(state.K1, gamma1, gamma2, cfg)
    D_tilde = state.K1**2 / (gamma1 * (state.N_sigma + state.K2) + additive)

    t, w = rule.nodes, rule.weights
    g2 = cfg.g**2
    a = np.sqrt(g2 * state.K1)
    sd = np.sqrt(g2 * state.Q + cfg.sigma_b)
    # inner average over the thermal variable (axis 1), outer over disorder (axis 0)
    arg = a * t[None, :] + sd * t[:, None]
    phi = np.tanh(arg)
    mean_in = phi @ w
    Q = float(w @ mean_in**2)
    if cfg.small_g_mode:
        K1 = g2 * Kii * state.K1
        K2 = g2 * g2 * Kii2 * state.K1**2
    else:
        K1 = float(w @ np.tanh(np.sqrt(a * a + sd * sd) * t) ** 2) - Q
        var_in = (phi**2) @ w - mean_in**2
        K2 = float(w @ var_in**2)
    return TheoryState(K1, K2, Q, N_sigma, D_tilde, gamma1, gamma2, Kij2, additive, state.layer + 1)


def run_theory(cfg: TheoryConfig, init: TheoryState, depth: int, rule: QuadratureRule | None = None) -> list[TheoryState]:
    """[init, step(init), ...] with ``depth`` steps."""
    states = [init]
    for _ in range(depth):
        states.append(theory_step(states[-1], cfg, rule))
    return states


def linearized_dimension(state: TheoryState, cfg: TheoryConfig, rule: QuadratureRule | None = None) -> float:
    """D~ of the next layer via the identity route: propagate K1, K2 with the
    linear slopes and N Sigma with the Sigma map, then form K1^2/(N Sigma + K2)."""
    Kii, Kii2, Kij2 = k_coefficients(state, cfg, rule)
    K1 = cfg.g**2 * Kii * state.K1
    K2 = cfg.g**4 * Kii2 * state.K1**2
    return K1 * K1 / (sigma_step(state, cfg, Kij2) + K2)


def expansion_check(params, prev: ActivityMoments, cfg, rule: QuadratureRule | None = None) -> dict:
    """Compare exact off-diagonal covariances with the linear response
    C_ij ~ K_ij Delta_ij, K_ij = E[phi'(sqrt(D_ii) x + z0_i)] E[phi'(sqrt(D_jj) y + z0_j)].

    Errors are aggregate: mean = sum|C - KD| / sum|C|, max = max|C - KD| / max|C|.
    """
    rule = rule or gauss_hermite()
    pre = preactivation_stats(params, prev, cfg.kind, cfg.g)
    exact = gaussian_tanh_moments(pre.z0, pre.delta, rule).cov
    s = np.sqrt(np.clip(np.diag(pre.delta), 0.0, None))
    slope = dphi(s[:, None] * rule.nodes[None, :] + pre.z0[:, None]) @ rule.weights
    linear = np.outer(slope, slope) * pre.delta
    off = ~np.eye(len(s), dtype=bool)
    err = np.abs(exact - linear)[off]
    ref = np.abs(exact)[off]
    if ref.sum() == 0:
        return {"mean_rel_error": 0.0 if err.sum() == 0 else np.inf, "max_rel_error": 0.0 if err.max(initial=0) == 0 else np.inf,
                "max_abs_error": float(err.max(initial=0.0))}
    return {
        "mean_rel_error": float(err.sum() / ref.sum()),
        "max_rel_error": float(err.max() / ref.max()),
        "max_abs_error": float(err.max()),
    }


def with_r(cfg: TheoryConfig, r: float) -> TheoryConfig:
    return replace(cfg, r=r)
