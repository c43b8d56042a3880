import math

import pytest

import meltpool


def test_radiation_loss_at_solidus():
    q = meltpool.radiation_flux(1290.0, 20.0, 0.47)
    assert q < 0
    assert abs(q) == pytest.approx(0.159, rel=0.01)


def test_phase_fraction_bounds_and_midpoint():
    assert meltpool.phase_fraction(20.0) == pytest.approx(0.0, abs=1e-6)
    assert meltpool.phase_fraction(1320.0) == pytest.approx(0.5)
    assert meltpool.phase_fraction(2000.0) == pytest.approx(1.0, abs=1e-6)


def test_goldak_power_audit():
    assert meltpool.absorbed_power() == pytest.approx(74.1)
    assert meltpool.total_power() == pytest.approx(74.1, rel=0.005)


def test_config_echo_round_trips():
    echo = meltpool.resolve_config({"source": {"absorptivity": 0.3}})
    assert echo["source"]["absorptivity"] == 0.3
    assert meltpool.resolve_config(echo) == echo
    assert meltpool.default_config()["source"]["model"] == "goldak"


def test_config_errors_name_the_field():
    with pytest.raises(meltpool.ConfigError, match="solver.dt"):
        meltpool.resolve_config({"solver": {"dt": -1.0}})
    with pytest.raises(ValueError):
        meltpool.resolve_config({"bogus": 1})


def test_catalog():
    cases = meltpool.case_catalog()
    assert len(cases) == 6
    b = next(c for c in cases if c["definition"]["label"] == "CBM-B-iso")
    assert b["definition"]["power"] == 195.0
    assert b["measured"]["length"] == 782.0
    assert b["computed_iso"]["length"] == 812.0
    assert meltpool.deviation_percent(707.0, 659.0) == pytest.approx(7.28, abs=0.01)


def test_analytic_oracles():
    assert meltpool.halfspace_flux_temperature(1.0, 0.01, 4.0, 20.0, 0.0, 1e-3) - 20.0 == pytest.approx(
        7.136, rel=1e-4
    )
    behind = meltpool.rosenthal_temperature(-0.2, 0.05)
    ahead = meltpool.rosenthal_temperature(0.2, 0.05)
    assert behind > ahead > 20.0
    report = meltpool.verify_halfspace()
    assert report["passed"]
    assert report["max_error"] <= 0.01


def test_small_run():
    cfg = {
        "grid": {
            "domain": {"width": 1.0, "depth": 0.5, "length": 1.5},
            "coarse_spacing": 0.1,
            "bands": {
                "x": {"lo": -0.1, "hi": 0.1, "spacing": 0.04},
                "y": {"lo": -0.08, "hi": 0.0, "spacing": 0.04},
                "z": {"lo": 0.2, "hi": 1.0, "spacing": 0.04},
            },
        },
        "source": {"path": {"start": [0.0, 0.3], "length": 0.5}},
        "metrics": {"travel": 0.4, "min_travel": 0.3},
    }
    out = meltpool.run(cfg)
    assert out["energy_balance"] < 0.01
    assert out["final_max_temperature"] > 1290.0
    assert not out["metrics"]["empty"]
    assert math.isfinite(out["metrics"]["length_um"])
    cold = meltpool.run({**cfg, "source": {**cfg["source"], "power": 0.0}, "boundary": {"emissivity": 0.0}})
    assert cold["final_max_temperature"] == 20.0
