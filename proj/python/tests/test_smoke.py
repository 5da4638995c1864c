import math
from pathlib import Path

import numpy as np
import pytest

import switchcert as sc

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def test_dwell_arithmetic():
    assert sc.dwell_time_min(1.52, 0.45) == pytest.approx(math.log(1.52) / 0.45, abs=1e-12)
    assert sc.contraction_factor(1.52, 0.45, 1.5) == pytest.approx(1.52 * math.exp(-0.675))
    assert sc.iss_decay_rate(1.52, 0.45, 1.5) == pytest.approx(0.17086, abs=1e-5)
    assert sc.iss_gain(1.52, 0.45, 1.5) == pytest.approx(17.162, abs=1e-3)
    with pytest.raises(sc.ValidationError):
        sc.dwell_time_min(0.9, 0.45)


def test_config_and_cover():
    cfg = sc.load_config(str(CONFIGS / "lotka_volterra.ini"))
    assert cfg.modes == [1, 2]
    assert len(cfg.hash) == 16
    cov = sc.cover(cfg)
    assert cov["states"].shape == (484, 2)
    assert cov["disturbances"].shape == (5, 1)
    assert np.all(cov["states"] >= 1.0) and np.all(cov["states"] <= 4.0)


def test_bad_config_raises():
    with pytest.raises(sc.ConfigError):
        sc.parse_config("[system]\nkind = nonsense\n")


def test_train_verify_simulate(tmp_path):
    cfg = sc.load_config(str(CONFIGS / "shared1d.ini"))
    res = sc.train_all(cfg)
    assert res["status"] == "certified"
    assert res["exit_code"] == 0
    bundle = res["bundle"]
    assert bundle.shared_v
    assert bundle.lyapunov(0, np.array([0.0])) == pytest.approx(0.0, abs=1e-9)

    report = sc.verify(cfg, bundle)
    assert report["pass"]
    assert report["zeta"] == 1.0

    path = tmp_path / "bundle.json"
    bundle.save(str(path))
    again = sc.load_bundle(str(path))
    assert again.lyapunov(1, np.array([0.7])) == bundle.lyapunov(1, np.array([0.7]))

    traj = sc.simulate(cfg, again, tau_d=0.05, horizon=2.0)
    assert traj["x"].shape == (len(traj["t"]), 1)
    assert traj["switches"] > 0
    assert traj["iss_ok"]
