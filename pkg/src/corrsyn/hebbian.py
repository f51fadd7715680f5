"""On-line Hebbian training of a deep tanh network with synaptic rescaling
and a penalty that steers the inter-RF weight correlation.

Weights are continuous and carry no prefactor (pre-activation = W h, no
bias). After every update each row is renormalised to Euclidean norm g.
The penalty for one layer is

    Phi = kappa_c / 2 * sum_j (S_j - sqrt(N) r)^2,   S_j = sum_{i != i'} w_ij w_i'j,

and the update subtracts its exact gradient
    dPhi/dw_ij = kappa_c (S_j - sqrt(N) r) * 2 (sum_{i' != i} w_i'j).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ensemble import InputEnsembleSpec, NetworkConfig, draw_inputs, sample_continuous_weights, sample_patterns
from .errors import DomainError, TrainingError
from .numerics import RandomSource
from .propagation import moments_from_samples
from .stats import LayerSummary, layer_summary

INITS = ("correlated", "iid")


@dataclass(frozen=True)
class HebbianConfig:
    N: int = 100
    depth: int = 4
    eta: float = 1e-4
    kappa_c: float = 0.5
    g: float = 0.5
    r: float = 0.0
    sample_count: int = 10_000
    alpha: float = 2.0
    sigma: float = 0.5
    realizations: int = 10
    eval_samples: int = 10_000
    layerwise: bool = False  # train layer 1 on the whole stream, then layer 2, ...
    init: str = "correlated"

    def __post_init__(self):
        if not (self.eta >= 0 and self.g > 0 and self.kappa_c >= 0 and self.r >= 0):
            raise DomainError("need eta >= 0, g > 0, kappa_c >= 0, r >= 0")
        if self.N < 1 or self.depth < 1 or self.sample_count < 0:
            raise DomainError("need N >= 1, depth >= 1, sample_count >= 0")
        if self.init not in INITS:
            raise DomainError(f"init must be one of {INITS}, got {self.init!r}")


@dataclass
class TrainState:
    weights: list
    step: int = 0

    def copy(self) -> TrainState:
        return TrainState([w.copy() for w in self.weights], self.step)


def pair_sums(W):
    """S_j = sum_{i != i'} w_ij w_i'j for every column j."""
    W = np.asarray(W, dtype=float)
    col = W.sum(axis=0)
    return col * col - np.sum(W * W, axis=0)


def penalty_value(W, r: float, N: int, kappa_c: float) -> float:
    dev = pair_sums(W) - np.sqrt(N) * r
    return float(0.5 * kappa_c * np.sum(dev * dev))


def penalty_grad(W, r: float, N: int, kappa_c: float):
    W = np.asarray(W, dtype=float)
    col = W.sum(axis=0)
    dev = col * col - np.sum(W * W, axis=0) - np.sqrt(N) * r
    return kappa_c * dev[None, :] * 2.0 * (col[None, :] - W)


def rescale_rows(W, g: float):
    W = np.asarray(W, dtype=float)
    norms = np.sqrt(np.sum(W * W, axis=1))
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise TrainingError(f"cannot rescale: row {zero[0]} of the weight matrix is all zero")
    return W * (g / norms)[:, None]


def hebbian_update(state: TrainState, layer: int, pre, post, cfg: HebbianConfig):
    """New weights of ``layer`` (not yet rescaled) after one sample."""
    pre = np.asarray(pre, dtype=float)
    post = np.asarray(post, dtype=float)
    if not (np.all(np.isfinite(pre)) and np.all(np.isfinite(post))):
        raise TrainingError(f"non-finite activation at step {state.step}, layer {layer}")
    W = state.weights[layer]
    N = W.shape[1]
    dw = np.outer(post, pre)
    if cfg.kappa_c:
        dw -= penalty_grad(W, cfg.r, N, cfg.kappa_c)
    with np.errstate(over="ignore", invalid="ignore"):
        W = W + cfg.eta * dw
    if not np.all(np.isfinite(W)):
        raise TrainingError(f"weights of layer {layer} diverged at step {state.step}")
    return W


def init_state(cfg: HebbianConfig, rs: RandomSource) -> TrainState:
    net_cfg = NetworkConfig(N=cfg.N, depth=cfg.depth, g=cfg.g, sigma_b=0.0,
                            r=cfg.r if cfg.init == "correlated" else 0.0, kind="continuous")
    weights = [rescale_rows(sample_continuous_weights(net_cfg, rs.child(l)), cfg.g) for l in range(cfg.depth)]
    return TrainState(weights, 0)


def forward_all(weights, h):
    """Activations of every layer for one sample or a batch (rows = samples)."""
    out = []
    for W in weights:
        h = np.tanh(h @ W.T)
        out.append(h)
    return out


def _train_simultaneous(state, inputs, cfg):
    for x in inputs:
        acts = [x] + forward_all(state.weights, x)
        new = [hebbian_update(state, l, acts[l], acts[l + 1], cfg) for l in range(cfg.depth)]
        state.weights = [rescale_rows(W, cfg.g) for W in new]
        state.step += 1
    return state


def _train_layerwise(state, inputs, cfg):
    h = np.asarray(inputs, dtype=float)
    for l in range(cfg.depth):
        for x in h:
            post = np.tanh(state.weights[l] @ x)
            state.weights[l] = rescale_rows(hebbian_update(state, l, x, post, cfg), cfg.g)
            state.step += 1
        h = np.tanh(h @ state.weights[l].T)
    return state


def evaluate(weights, eval_inputs) -> list[LayerSummary]:
    return [layer_summary(moments_from_samples(h)) for h in forward_all(weights, np.asarray(eval_inputs, dtype=float))]


def train_network(cfg: HebbianConfig, inputs, rs: RandomSource, eval_inputs=None, state: TrainState | None = None):
    """Train one randomly initialised network on ``inputs`` (streamed in row
    order) and summarise every layer on ``eval_inputs``.

    Returns ``(state, summaries)``; summaries is empty when no evaluation
    batch is given.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != cfg.N:
        raise DomainError(f"inputs must have shape (S, {cfg.N}), got {inputs.shape}")
    state = init_state(cfg, rs) if state is None else state.copy()
    if cfg.eta > 0:
        state = _train_layerwise(state, inputs, cfg) if cfg.layerwise else _train_simultaneous(state, inputs, cfg)
    summaries = evaluate(state.weights, eval_inputs) if eval_inputs is not None else []
    return state, summaries


@dataclass
class HebbianResult:
    states: list
    summaries: list  # summaries[k][l]: realization k, layer l
    baseline: list  # same layout, at initialisation
    input_summaries: list = field(default_factory=list)

    def mean(self, attr: str, which: str = "summaries"):
        """Per-layer average of a LayerSummary field over realizations."""
        return np.array([[getattr(s, attr) for s in row] for row in getattr(self, which)]).mean(axis=0)


def run_realization(cfg: HebbianConfig, rs: RandomSource):
    """One realization: fresh input ensemble, training stream, held-out batch
    and initial weights, all drawn from children of ``rs``."""
    spec = InputEnsembleSpec.from_alpha(cfg.N, cfg.alpha, cfg.sigma)
    xi, lam = sample_patterns(spec, rs.child(0))
    train = draw_inputs(xi, lam, cfg.sample_count, rs.child(1))
    held = draw_inputs(xi, lam, cfg.eval_samples, rs.child(2))
    init = init_state(cfg, rs.child(3))
    base = evaluate(init.weights, held)
    state, summ = train_network(cfg, train, rs.child(3), held, state=init)
    return state, summ, base, layer_summary(moments_from_samples(held))


def run_hebbian(cfg: HebbianConfig, rs: RandomSource) -> HebbianResult:
    res = HebbianResult([], [], [], [])
    for k in range(cfg.realizations):
        state, summ, base, inp = run_realization(cfg, rs.child(k))
        res.states.append(state)
        res.summaries.append(summ)
        res.baseline.append(base)
        res.input_summaries.append(inp)
    return res

