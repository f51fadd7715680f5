"""Experiment runner.

    corrsyn <meanfield|montecarlo|theory|sigma-map|spectrum|hebbian>
            [--config FILE] [--set section.key=value]... [--seed U64] [--out DIR]

The config file is INI-style, one section per subsystem (run, network,
inputs, theory, sigma_map, spectrum, hebbian); ``--set`` overrides win over
the file. A key without a section prefix is looked up in run, network,
inputs, theory in that order. Every command writes plot-ready CSVs plus
``manifest.json`` into the output directory.

Exit codes: 0 ok, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .ensemble import (
    KINDS, InputEnsembleSpec, LayerParams, NetworkConfig, draw_inputs, sample_network, sample_patterns, save_network,
)
from .errors import ConfigError, DomainError, NumericalError
from .hebbian import HebbianConfig, run_realization
from .numerics import RandomSource
from .propagation import ActivityMoments, moments_from_samples, propagate_moments, sample_moments
from .stats import layer_summary, mp_edges, spectrum_report
from .theory import TheoryConfig, k_coefficients, operating_point, run_theory, sigma_map, state_from_covariance

COMMANDS = ("meanfield", "montecarlo", "theory", "sigma-map", "spectrum", "hebbian")
SUMMARY_COLS = ("D_tilde", "N_sigma", "K1", "K2", "Q")
THEORY_COLS = ("D_tilde", "N_sigma", "K1", "K2", "Q", "gamma1", "gamma2", "kappa", "additive")


# -- configuration -----------------------------------------------------------

@dataclass
class RunSection:
    instances: int = 10
    samples: int = 100_000
    seed: int = 0
    r: tuple = (0.0, 0.5, 1.0, 2.0)
    kinds: tuple = ("binary",)
    workers: int = 1
    chunk: int = 20_000


@dataclass
class NetworkSection:
    N: int = 200
    depth: int = 4
    g: float = 0.9
    sigma_b: float = 0.1


@dataclass
class InputSection:
    alpha: float = 2.0
    sigma: float = 0.5


@dataclass
class TheorySection:
    small_g_mode: bool = False
    diag_mode: str = "full"
    exact_affine: bool = False
    compare: bool = False  # also run mean-field propagation for a D~ comparison column


@dataclass
class SigmaMapSection:
    points: int = 21
    n_sigma_max: float = 0.0  # 0: twice the largest operating point


@dataclass
class SpectrumSection:
    N: int = 1000
    bins: int = 50
    instances: int = 1


@dataclass
class HebbianSection:
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
    layerwise: bool = False
    init: str = "correlated"
    checkpoint: bool = True


@dataclass
class ExperimentConfig:
    run: RunSection = field(default_factory=RunSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    inputs: InputSection = field(default_factory=InputSection)
    theory: TheorySection = field(default_factory=TheorySection)
    sigma_map: SigmaMapSection = field(default_factory=SigmaMapSection)
    spectrum: SpectrumSection = field(default_factory=SpectrumSection)
    hebbian: HebbianSection = field(default_factory=HebbianSection)

    def to_dict(self):
        return asdict(self)


SECTIONS = [f.name for f in fields(ExperimentConfig)]
LOOKUP_ORDER = ("run", "network", "inputs", "theory")


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(default, text: str):
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        v = float(text)
        if v != int(v):
            raise ValueError(f"not an integer: {text!r}")
        return int(v)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        items = [s.strip() for s in text.split(",") if s.strip()]
        return tuple(_convert(default[0], s) for s in items) if default else tuple(items)
    return text.strip()


def _set_key(cfg: ExperimentConfig, key: str, value: str):
    if "." in key:
        sec, name = key.split(".", 1)
        candidates = [sec]
    else:
        name, candidates = key, [s for s in LOOKUP_ORDER if hasattr(getattr(cfg, s), key)][:1]
    sec = candidates[0] if candidates else None
    if sec not in SECTIONS or not hasattr(getattr(cfg, sec), name):
        raise ConfigError(f"unknown configuration key {key!r}")
    section = getattr(cfg, sec)
    try:
        setattr(section, name, _convert(getattr(section, name), value))
    except ValueError as exc:
        raise ConfigError(f"bad value for {sec}.{name}: {exc}") from None


def load_config(path=None, overrides=(), seed=None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keep N distinct from n
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        for sec in parser.sections():
            for key, value in parser.items(sec):
                _set_key(cfg, f"{sec}.{key}", value)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        _set_key(cfg, key.strip(), value)
    if seed is not None:
        cfg.run.seed = seed
    if not 0 <= cfg.run.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg


def _validated(build):
    """Run a config constructor, turning domain failures into ConfigError."""
    try:
        return build()
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def network_configs(cfg: ExperimentConfig):
    """{(kind, r): NetworkConfig} for the sweep, validated up front."""
    run, net = cfg.run, cfg.network
    if run.instances < 1 or run.samples < 2 or run.workers < 1:
        raise ConfigError("need run.instances >= 1, run.samples >= 2, run.workers >= 1")
    for kind in run.kinds:
        if kind not in KINDS:
            raise ConfigError(f"run.kinds: unknown weight kind {kind!r}")
    out = {}
    for kind in run.kinds:
        for r in run.r:
            out[kind, r] = _validated(lambda: NetworkConfig(net.N, net.depth, net.g, net.sigma_b, r, kind))
    return out


def input_spec(cfg: ExperimentConfig, N=None) -> InputEnsembleSpec:
    return _validated(lambda: InputEnsembleSpec.from_alpha(N or cfg.network.N, cfg.inputs.alpha, cfg.inputs.sigma))


# -- output ------------------------------------------------------------------

def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def aggregate(rows, keys, values):
    """Mean and standard error over instances, grouped by ``keys``.

    rows are dicts; groups keep first-seen order and values are summed in
    row order so the output does not depend on scheduling."""
    groups = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row)
    header = list(keys) + ["n"] + [f"{v}_{s}" for v in values for s in ("mean", "stderr")]
    out = []
    for key, grp in groups.items():
        line = list(key) + [len(grp)]
        for v in values:
            x = np.array([g[v] for g in grp], dtype=float)
            se = x.std(ddof=1) / np.sqrt(len(x)) if len(x) > 1 else float("nan")
            line += [x.mean(), se]
        out.append(line)
    return header, out


def write_table(out: Path, name: str, keys, values, rows):
    write_csv(out / f"{name}.csv", list(keys) + list(values), [[row[k] for k in list(keys) + list(values)] for row in rows])
    header, agg = aggregate(rows, [k for k in keys if k != "instance"], values)
    write_csv(out / f"{name}_summary.csv", header, agg)


def _pmap(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- per-instance jobs (module level so worker processes can pickle them) ----

def _instance_streams(seed, k):
    root = RandomSource(seed).child(k)
    return root.child(0), root.child(1)  # inputs, networks


def _network_for(nc: NetworkConfig, net_rs: RandomSource):
    # the same stream for every r keeps the sweep paired (common random numbers)
    return sample_network(nc, net_rs.child(KINDS.index(nc.kind)))


def _meanfield_job(args):
    cfg, k = args
    configs = network_configs(cfg)
    in_rs, net_rs = _instance_streams(cfg.run.seed, k)
    _, lam = sample_patterns(input_spec(cfg), in_rs.child(0))
    init = ActivityMoments(np.zeros(lam.shape[0]), lam)
    rows = []
    for (kind, r), nc in configs.items():
        moms = [init] + propagate_moments(_network_for(nc, net_rs), init, nc)
        rows += _summary_rows(kind, r, k, moms)
    return rows


def _montecarlo_job(args):
    cfg, k = args
    configs = network_configs(cfg)
    in_rs, net_rs = _instance_streams(cfg.run.seed, k)
    xi, lam = sample_patterns(input_spec(cfg), in_rs.child(0))
    x = draw_inputs(xi, lam, cfg.run.samples, in_rs.child(1))
    init = moments_from_samples(x)
    rows = []
    for (kind, r), nc in configs.items():
        moms = [init] + sample_moments(_network_for(nc, net_rs), x, nc, cfg.run.chunk)
        rows += _summary_rows(kind, r, k, moms)
    return rows


def _summary_rows(kind, r, k, moms):
    rows = []
    for layer, m in enumerate(moms):
        s = layer_summary(m)
        rows.append(dict(kind=kind, r=r, instance=k, layer=layer, **{c: getattr(s, c) for c in SUMMARY_COLS}))
    return rows


def theory_configs(cfg: ExperimentConfig):
    net, th = cfg.network, cfg.theory
    network_configs(cfg)
    return {
        (kind, r): _validated(lambda: TheoryConfig(net.N, net.g, net.sigma_b, r, kind, th.small_g_mode, th.diag_mode, th.exact_affine))
        for kind in cfg.run.kinds for r in cfg.run.r
    }


def _theory_job(args):
    cfg, k = args
    tcs = theory_configs(cfg)
    in_rs, _ = _instance_streams(cfg.run.seed, k)
    _, lam = sample_patterns(input_spec(cfg), in_rs.child(0))
    init = state_from_covariance(lam)
    mf = {}
    if cfg.theory.compare:
        mf = {(row["kind"], row["r"], row["layer"]): row["D_tilde"] for row in _meanfield_job((cfg, k))}
    rows = []
    for (kind, r), tc in tcs.items():
        for st in run_theory(tc, init, cfg.network.depth):
            row = dict(kind=kind, r=r, instance=k, layer=st.layer, **{c: getattr(st, c) for c in THEORY_COLS})
            if cfg.theory.compare:
                row["D_tilde_meanfield"] = mf[kind, r, st.layer]
            rows.append(row)
    return rows


# -- commands ----------------------------------------------------------------

def cmd_meanfield(cfg: ExperimentConfig, out: Path):
    network_configs(cfg)
    rows = sum(_pmap(_meanfield_job, [(cfg, k) for k in range(cfg.run.instances)], cfg.run.workers), [])
    write_table(out, "meanfield", ("kind", "r", "instance", "layer"), SUMMARY_COLS, rows)
    return rows


def cmd_montecarlo(cfg: ExperimentConfig, out: Path):
    network_configs(cfg)
    rows = sum(_pmap(_montecarlo_job, [(cfg, k) for k in range(cfg.run.instances)], cfg.run.workers), [])
    write_table(out, "montecarlo", ("kind", "r", "instance", "layer"), SUMMARY_COLS, rows)
    return rows


def cmd_theory(cfg: ExperimentConfig, out: Path):
    theory_configs(cfg)
    rows = sum(_pmap(_theory_job, [(cfg, k) for k in range(cfg.run.instances)], cfg.run.workers), [])
    values = THEORY_COLS + (("D_tilde_meanfield",) if cfg.theory.compare else ())
    write_table(out, "theory", ("kind", "r", "instance", "layer"), values, rows)
    return rows


def cmd_sigma_map(cfg: ExperimentConfig, out: Path):
    """Affine N Sigma map of the first layer at the statistics of one input
    ensemble draw, for every r in the sweep."""
    tcs = theory_configs(cfg)
    sm = cfg.sigma_map
    if sm.points < 2 or sm.n_sigma_max < 0:
        raise ConfigError("need sigma_map.points >= 2 and sigma_map.n_sigma_max >= 0")
    in_rs, _ = _instance_streams(cfg.run.seed, 0)
    _, lam = sample_patterns(input_spec(cfg), in_rs.child(0))
    state = state_from_covariance(lam)
    lines, ops = [], []
    for (kind, r), tc in tcs.items():
        kappa = k_coefficients(state, tc)[2]
        slope, intercept = sigma_map(state, tc, kappa)
        op = operating_point(state, tc, kappa) if slope < 1 else float("nan")
        ops.append([kind, r, kappa, slope, intercept, op, slope * op + intercept - op])
        lines.append((kind, r, slope, intercept))
    top = sm.n_sigma_max or 2.0 * max([o[5] for o in ops if np.isfinite(o[5])] + [state.N_sigma])
    grid = np.linspace(0.0, top, sm.points)
    rows = [[kind, r, x, slope * x + intercept] for kind, r, slope, intercept in lines for x in grid]
    write_csv(out / "sigma_map.csv", ["kind", "r", "N_sigma_in", "N_sigma_out"], rows)
    write_csv(out / "operating_point.csv", ["kind", "r", "kappa", "slope", "intercept", "operating_point", "residual"], ops)
    return ops


def cmd_spectrum(cfg: ExperimentConfig, out: Path):
    sp = cfg.spectrum
    if sp.bins < 1 or sp.instances < 1:
        raise ConfigError("need spectrum.bins >= 1 and spectrum.instances >= 1")
    if not cfg.inputs.alpha > 1:
        raise ConfigError(f"inputs.alpha must exceed 1 for the spectral law, got {cfg.inputs.alpha}")
    spec = input_spec(cfg, sp.N)
    hist, summ = [], []
    for k in range(sp.instances):
        in_rs, _ = _instance_streams(cfg.run.seed, k)
        _, lam = sample_patterns(spec, in_rs.child(0))
        rep = spectrum_report(lam, cfg.inputs.alpha, cfg.inputs.sigma, sp.bins)
        lo, hi = rep.support
        for b in range(sp.bins):
            hist.append([k, rep.bin_edges[b], rep.bin_edges[b + 1], rep.centers[b], rep.density[b], rep.theory[b]])
        ev = rep.eigenvalues
        D = ev.sum() ** 2 / np.sum(ev**2)
        summ.append([k, rep.distance, ev.min(), ev.max(), lo, hi, D / sp.N])
    write_csv(out / "spectrum.csv", ["instance", "bin_lo", "bin_hi", "center", "density", "theory"], hist)
    write_csv(out / "spectrum_summary.csv", ["instance", "l1_distance", "eig_min", "eig_max", "edge_lo", "edge_hi", "D_tilde"], summ)
    return summ


def hebbian_config(cfg: ExperimentConfig) -> HebbianConfig:
    h = asdict(cfg.hebbian)
    h.pop("checkpoint")
    hc = _validated(lambda: HebbianConfig(**h))
    _validated(lambda: NetworkConfig(hc.N, hc.depth, hc.g, 0.0, hc.r, "continuous"))
    return hc


def _hebbian_job(args):
    hc, seed, k = args
    return run_realization(hc, RandomSource(seed).child(k))


def cmd_hebbian(cfg: ExperimentConfig, out: Path):
    hc = hebbian_config(cfg)
    results = _pmap(_hebbian_job, [(hc, cfg.run.seed, k) for k in range(hc.realizations)], cfg.run.workers)
    rows = []
    for k, (state, trained, base, inp) in enumerate(results):
        for phase, summ in (("init", base), ("trained", trained)):
            rows.append(dict(phase=phase, instance=k, layer=0, **{c: getattr(inp, c) for c in SUMMARY_COLS}))
            for l, s in enumerate(summ, start=1):
                rows.append(dict(phase=phase, instance=k, layer=l, **{c: getattr(s, c) for c in SUMMARY_COLS}))
    rows.sort(key=lambda row: (row["phase"] != "init", row["instance"], row["layer"]))
    write_table(out, "hebbian", ("phase", "instance", "layer"), SUMMARY_COLS, rows)
    if cfg.hebbian.checkpoint and results:
        state = results[0][0]
        layers = [LayerParams(W.copy(), np.zeros(W.shape[0])) for W in state.weights]
        save_network(out / "hebbian_weights.bin", layers, "continuous", step=state.step)
    return rows


HANDLERS = {
    "meanfield": cmd_meanfield,
    "montecarlo": cmd_montecarlo,
    "theory": cmd_theory,
    "sigma-map": cmd_sigma_map,
    "spectrum": cmd_spectrum,
    "hebbian": cmd_hebbian,
}


def build_parser():
    p = argparse.ArgumentParser(prog="corrsyn", description="Dimensionality of deep representations under correlated synapses.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="INI file with [run], [network], [inputs], ... sections")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value (repeatable; wins over --config)")
    p.add_argument("--seed", type=int, help="unsigned 64-bit master seed")
    p.add_argument("--out", type=Path, default=Path("corrsyn-out"), help="output directory")
    return p


def run(command, cfg: ExperimentConfig, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    HANDLERS[command](cfg, out)
    manifest = {
        "command": command,
        "config": cfg.to_dict(),
        "seed": cfg.run.seed,
        "started": started.isoformat(),
        "elapsed_s": time.perf_counter() - t0,
        "versions": {"corrsyn": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=list) + "\n")
    return manifest


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides, args.seed)
        run(args.command, cfg, args.out)
    except (ConfigError, DomainError) as exc:
        print(f"corrsyn: configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"corrsyn: numerical error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
