import csv
import json

import numpy as np
import pytest

from corrsyn import cli
from corrsyn.ensemble import load_network
from corrsyn.errors import ConfigError, PropagationError

SMALL = ["network.N=20", "network.depth=3", "run.instances=3", "run.samples=4000", "run.r=0,1,2"]


def read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def column(rows, key, **where):
    return np.array([float(r[key]) for r in rows if all(r[k] == str(v) for k, v in where.items())])


def main(tmp_path, command, *sets, seed=None, name="out"):
    argv = [command, "--out", str(tmp_path / name)]
    for s in sets:
        argv += ["--set", s]
    if seed is not None:
        argv += ["--seed", str(seed)]
    return cli.main(argv), tmp_path / name


def test_config_file_and_overrides(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\nseed = 4\nr = 0, 0.5\n[network]\nN = 64\ng = 0.7\n[hebbian]\nlayerwise = yes\n")
    cfg = cli.load_config(ini, ["g=0.8", "run.instances=2"])
    assert cfg.network.N == 64 and cfg.network.g == 0.8 and cfg.run.instances == 2
    assert cfg.run.r == (0.0, 0.5) and cfg.run.seed == 4 and cfg.hebbian.layerwise is True
    assert cli.load_config(ini, seed=9).run.seed == 9
    # unqualified keys resolve in run, network, inputs, theory order
    assert cli.load_config(None, ["sigma=0.3"]).inputs.sigma == 0.3
    for bad in (["nope=1"], ["network.nope=1"], ["run.instances=1.5"], ["novalue"]):
        with pytest.raises(ConfigError):
            cli.load_config(None, bad)
    with pytest.raises(ConfigError):
        cli.load_config(tmp_path / "missing.ini")


def test_exit_codes(tmp_path, monkeypatch, capsys):
    assert main(tmp_path, "meanfield", "bogus=1")[0] == 2
    assert main(tmp_path, "meanfield", "network.N=100", "run.r=10")[0] == 2  # r above sqrt(N)
    assert main(tmp_path, "meanfield", "run.kinds=ternary")[0] == 2

    def boom(cfg, out):
        raise PropagationError("psi exceeds 1")
    monkeypatch.setitem(cli.HANDLERS, "meanfield", boom)
    assert main(tmp_path, "meanfield")[0] == 3
    assert "psi" in capsys.readouterr().err


def test_meanfield_outputs_are_reproducible(tmp_path):
    code, a = main(tmp_path, "meanfield", *SMALL, name="a")
    assert code == 0
    _, b = main(tmp_path, "meanfield", *SMALL, name="b")
    for f in ("meanfield.csv", "meanfield_summary.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    rows = read(a / "meanfield.csv")
    assert len(rows) == 3 * 3 * 4  # r values x instances x (input + 3 layers)
    # full double precision round trip
    val = rows[5]["D_tilde"]
    assert repr(float(val)) == repr(float(f"{float(val):.17g}"))
    assert len(val.replace("0.", "").lstrip("0")) >= 15
    man = json.loads((a / "manifest.json").read_text())
    assert {"command", "config", "seed", "started", "elapsed_s", "versions"} <= man.keys()
    assert man["config"]["network"]["N"] == 20
    # deeper layers lose dimension, correlated weights keep more of it
    for r in (0.0, 1.0, 2.0):
        d = column(rows, "D_tilde", r=r, instance=0)
        assert np.all(np.diff(d) < 0)
    assert np.all(column(rows, "D_tilde", r=2.0, layer=3) > column(rows, "D_tilde", r=0.0, layer=3))


def test_workers_do_not_change_results(tmp_path):
    _, a = main(tmp_path, "meanfield", *SMALL, "run.workers=1", name="a")
    _, b = main(tmp_path, "meanfield", *SMALL, "run.workers=2", name="b")
    assert (a / "meanfield_summary.csv").read_bytes() == (b / "meanfield_summary.csv").read_bytes()


def test_montecarlo_input_layer(tmp_path):
    code, out = main(tmp_path, "montecarlo", "network.N=60", "network.depth=0", "run.instances=4",
                     "run.samples=20000", "run.r=0")
    assert code == 0
    d = column(read(out / "montecarlo.csv"), "D_tilde", layer=0)
    assert abs(d.mean() - 2 / 3) < 0.1  # finite-N and finite-sample participation ratio


def test_montecarlo_tracks_meanfield(tmp_path):
    _, mc = main(tmp_path, "montecarlo", *SMALL, "run.samples=50000", name="mc")
    _, mf = main(tmp_path, "meanfield", *SMALL, name="mf")
    a = column(read(mc / "montecarlo.csv"), "D_tilde", layer=3)
    b = column(read(mf / "meanfield.csv"), "D_tilde", layer=3)
    assert np.max(np.abs(a / b - 1)) < 0.15


def test_theory_command(tmp_path):
    code, out = main(tmp_path, "theory", *SMALL, "theory.compare=1")
    assert code == 0
    rows = read(out / "theory.csv")
    assert "D_tilde_meanfield" in rows[0]
    assert np.all(column(rows, "additive", r=0.0, layer=2) == 0)
    assert np.all(column(rows, "additive", r=2.0, layer=2) > 0)
    assert main(tmp_path, "theory", "theory.diag_mode=other")[0] == 2


def test_sigma_map_command(tmp_path):
    code, out = main(tmp_path, "sigma-map", "network.N=100", "run.r=0,0.5,1")
    assert code == 0
    ops = read(out / "operating_point.csv")
    slopes = {o["slope"] for o in ops}
    assert len(slopes) == 1
    icpt = [float(o["intercept"]) for o in ops]
    assert icpt[0] > 0 and icpt[0] < icpt[1] < icpt[2]  # K2 term plus the r-dependent drive
    assert all(abs(float(o["residual"])) < 1e-12 for o in ops)
    assert len(read(out / "sigma_map.csv")) == 3 * 21


def test_spectrum_command(tmp_path):
    code, out = main(tmp_path, "spectrum", "spectrum.N=300", "spectrum.bins=30")
    assert code == 0
    hist = read(out / "spectrum.csv")
    summ = read(out / "spectrum_summary.csv")[0]
    assert len(hist) == 30
    hi = float(summ["edge_hi"])
    tail = [h for h in hist if float(h["bin_lo"]) > 1.02 * hi]
    assert tail and all(float(h["theory"]) == 0 and float(h["density"]) == 0 for h in tail)
    assert float(summ["l1_distance"]) < 0.3
    assert main(tmp_path, "spectrum", "inputs.alpha=0.5")[0] == 2


def test_hebbian_command(tmp_path):
    code, out = main(tmp_path, "hebbian", "hebbian.N=12", "hebbian.depth=2", "hebbian.sample_count=300",
                     "hebbian.eval_samples=400", "hebbian.realizations=2")
    assert code == 0
    rows = read(out / "hebbian.csv")
    assert len(rows) == 2 * 2 * 3
    assert {r["phase"] for r in rows} == {"init", "trained"}
    layers, kind, step = load_network(out / "hebbian_weights.bin")
    assert kind == "continuous" and step == 300 and len(layers) == 2
    np.testing.assert_allclose(np.linalg.norm(layers[0].weights, axis=1), 0.5, rtol=1e-12)
    assert main(tmp_path, "hebbian", "hebbian.eta=-1")[0] == 2
