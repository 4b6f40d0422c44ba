import json
import math

import numpy as np
import pytest

from faddeevlab.cli import main
from faddeevlab.experiments import (
    CheckpointError,
    ConfigError,
    ExperimentConfig,
    ThresholdError,
    background_spec,
    checkpoint_roundtrip,
    load_checkpoint,
    parse_config,
    read_csv,
    run_experiment,
    simulate,
    stability_summary,
    write_csv,
)
from faddeevlab.grid import UniformGrid
from faddeevlab.integrator import StateSnapshot
from faddeevlab.waves import BackgroundField, lambda_norms

SMALL_2D = {"kind": "stability_scaling", "dim": 2, "half_width": 4.5, "spacing": 0.125, "t_max": 2.0,
            "cadence": 0.5}
SMALL_RADIAL = {"kind": "stability_scaling", "dim": 3, "radial": True, "half_width": 5.0, "spacing": 0.05,
                "t_max": 3.0, "cadence": 0.5}


def test_minimal_config_fills_defaults(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("kind: stability_scaling\n")
    cfg = parse_config(p)
    assert cfg.dim == 2 and cfg.t_max == 20.0 and cfg.spacings == [cfg.spacing]
    assert cfg.epsilons == [1e-2, 5e-3, 2.5e-3]
    assert set(cfg.perturbation) == {"epsilon", "u0", "u1", "v0", "v1"}


def test_unknown_key_named(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("kind: bounds_audit\ncfl_margin: 0.3\n")
    with pytest.raises(ConfigError, match="cfl_margin"):
        parse_config(p)
    with pytest.raises(ConfigError, match="kind"):
        parse_config({"dim": 2})
    with pytest.raises(ConfigError, match="unknown experiment kind"):
        parse_config({"kind": "nope"})
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config(tmp_path / "missing.yaml")
    with pytest.raises(ConfigError, match="perturbation"):
        parse_config({"kind": "bounds_audit", "perturbation": {"w0": {}}})


def test_threshold_refusal_reports_value_and_bound():
    with pytest.raises(ThresholdError) as err:
        parse_config({"kind": "stability_scaling", "background": {"family": "poly12", "amplitude": 1.0}})
    msg = str(err.value)
    lam0 = lambda_norms(background_spec(ExperimentConfig("bounds_audit", background={"family": "poly12", "amplitude": 1.0})),
                        regularity=False).lambda0
    assert f"lambda0 = {lam0:.6g}" in msg and f"{2 * math.pi:.6g}" in msg


def test_lambda_fraction_sets_binding_threshold():
    spec = background_spec(ExperimentConfig("bounds_audit", dim=3))
    ln = lambda_norms(spec, regularity=False)
    assert max(ln.lambda0 / (4 * math.pi**2), ln.lambda1 / (8 * math.pi)) == pytest.approx(0.9, rel=1e-12)


def test_low_regularity_background_refused():
    with pytest.raises(ThresholdError, match="regular"):
        parse_config({"kind": "bounds_audit", "background": {"family": "poly6", "lambda_fraction": 0.5}})


def test_digest_ignores_output_location():
    a = ExperimentConfig("bounds_audit", out="x")
    b = ExperimentConfig("bounds_audit", out="y", checkpoint_every=7)
    assert a.digest() == b.digest() != ExperimentConfig("bounds_audit", t_max=3.0).digest()


# ---------------------------------------------------------------------------
# checkpoints

def _random_state(rng):
    g = UniformGrid(2, 1.0, 0.125)
    return StateSnapshot(g, 0.3, *(rng.normal(size=g.shape) for _ in range(4)))


def test_roundtrip_bitwise(tmp_path, rng):
    s = _random_state(rng)
    back = checkpoint_roundtrip(s, tmp_path / "s.npz")
    assert back.t == s.t and back.grid == s.grid
    for a, b in zip(s.arrays(), back.arrays()):
        assert a.tobytes() == b.tobytes()


def test_corrupted_checkpoint_refused(tmp_path, rng):
    p = tmp_path / "s.npz"
    checkpoint_roundtrip(_random_state(rng), p)
    data = bytearray(p.read_bytes())
    data[len(data) // 2] ^= 0xFF
    p.write_bytes(bytes(data))
    with pytest.raises(CheckpointError):
        load_checkpoint(p)
    p.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError, match="unreadable"):
        load_checkpoint(p)


def test_config_hash_mismatch_refused(tmp_path, rng):
    p = tmp_path / "s.npz"
    checkpoint_roundtrip(_random_state(rng), p)
    with pytest.raises(CheckpointError, match="config hash"):
        load_checkpoint(p, config_hash="other")


@pytest.mark.parametrize("conf", [SMALL_2D, SMALL_RADIAL], ids=["2d", "radial"])
def test_resume_matches_one_shot(tmp_path, conf):
    cfg = parse_config(dict(conf, checkpoint_every=1))
    bf = BackgroundField(background_spec(cfg))
    h = cfg.spacing
    full = simulate(cfg, 1e-2, h, bf)
    ck = tmp_path / "ck.npz"
    half = full.steps // 2
    simulate(cfg, 1e-2, h, bf, checkpoint_path=ck, stop_after=half)
    assert load_checkpoint(ck)[1]["step"] == half
    resumed = simulate(cfg, 1e-2, h, bf, resume_path=ck)
    write_csv(tmp_path / "a.csv", full.rows)
    write_csv(tmp_path / "b.csv", resumed.rows)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    for a, b in zip(full.final.arrays(), resumed.final.arrays()):
        assert a.tobytes() == b.tobytes()
    with pytest.raises(CheckpointError, match="config hash"):
        simulate(cfg, 5e-3, h, bf, resume_path=ck)


# ---------------------------------------------------------------------------
# drivers and artifacts

def test_stability_artifacts_reproducible(tmp_path):
    cfg = parse_config(dict(SMALL_RADIAL, epsilons=[1e-2, 5e-3]))
    st1, s1 = run_experiment(cfg, out=tmp_path / "a")
    st2, s2 = run_experiment(cfg, out=tmp_path / "b")
    da, db = tmp_path / "a" / "stability_scaling", tmp_path / "b" / "stability_scaling"
    for name in ("timeseries_eps0.01.csv", "timeseries_eps0.005.csv"):
        assert (da / name).read_bytes() == (db / name).read_bytes()
    summ = json.loads((da / "summary.json").read_text())
    assert summ["status"] == st1 and set(summ["runs"]) == {"0.01", "0.005"}
    # every verdict quantity is a pure reduction of the CSV
    for eps, run in summ["runs"].items():
        again = stability_summary(read_csv(da / f"timeseries_eps{eps}.csv"))
        for k, v in again.items():
            assert run[k] == v
    assert summ["energy_ratios"][0] == pytest.approx(2.0, rel=0.1)


def test_csv_schema(tmp_path):
    cfg = parse_config(dict(SMALL_RADIAL, epsilons=[1e-2]))
    res = simulate(cfg, 1e-2, cfg.spacing, BackgroundField(background_spec(cfg)))
    write_csv(tmp_path / "x.csv", res.rows)
    head = (tmp_path / "x.csv").read_text().splitlines()[0].split(",")
    assert head[:18] == ["t", "E1", "E2", "E3", "E4", "ghost1", "ghost2", "ghost3", "ghost4",
                         "X0", "X1", "X2", "X3", "hyp_margin", "equiv_min", "equiv_max", "ghost_cum",
                         "boundary_leak"]
    cols = read_csv(tmp_path / "x.csv")
    assert np.allclose(cols["t"], np.arange(0, 3.01, 0.5))
    assert np.all(cols["hyp_margin"] > 0.9)


def test_abort_record(tmp_path):
    cfg = parse_config(dict(SMALL_2D, half_width=2.5))
    status, summ = run_experiment(cfg, out=tmp_path)
    assert status == 2 and summ["abort"]["type"] == "ConfigError"
    saved = json.loads((tmp_path / "stability_scaling" / "summary.json").read_text())
    assert saved["abort"]["message"] == summ["abort"]["message"]


def test_geodesic_driver_small(tmp_path):
    cfg = parse_config({"kind": "geodesic_exactness", "dim": 3, "radial": True, "half_width": 4.5,
                        "spacings": [0.05, 0.025], "t_max": 2.0})
    status, summ = run_experiment(cfg, out=tmp_path)
    assert status == 0 and summ["ratios"][0] >= 12.0
    assert (tmp_path / "geodesic_exactness" / "error_h0.025.csv").exists()


def test_decay_driver(tmp_path):
    cfg = parse_config({"kind": "decay_profile", "dim": 3, "t_max": 10.0, "cadence": 1.0})
    status, summ = run_experiment(cfg, out=tmp_path)
    assert status == 0 and summ["ratio"] <= 1.2


# ---------------------------------------------------------------------------
# command line

def test_cli_bounds_audit(tmp_path, capsys):
    cfgp = tmp_path / "audit.yaml"
    cfgp.write_text("kind: bounds_audit\ndim: 3\nt_max: 4.0\naudit_times: 5\n")
    assert main(["bounds_audit", "--config", str(cfgp), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert '"audit_times": 5' in out and "bounds_audit: PASS" in out
    summ = json.loads((tmp_path / "bounds_audit" / "summary.json").read_text())
    assert summ["min_margin_theta"] > 0 and summ["max_sup_theta"] < math.pi / 2


def test_cli_refusals(tmp_path, capsys):
    cfgp = tmp_path / "c.yaml"
    cfgp.write_text("kind: bounds_audit\nbackground: {family: poly12, amplitude: 5.0}\n")
    assert main(["bounds_audit", "--config", str(cfgp)]) == 2
    assert "violates the bound" in capsys.readouterr().err
    assert main(["decay_profile", "--config", str(cfgp)]) == 2
    assert "does not match" in capsys.readouterr().err
