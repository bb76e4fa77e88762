"""Shared fixtures for the test suite."""
import numpy as np
import pytest
import yaml

from beliefkit.models import JumpLaw, KernelParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def diffusive_params():
    return KernelParams.constant(0.05)


@pytest.fixture
def gaussian_params():
    return KernelParams.constant(0.05, 0.001, JumpLaw.gaussian(0.5))


@pytest.fixture
def small_config():
    """A run config small enough for the command-line tests."""
    return {
        "seed": 3,
        "scenario": {
            "n_steps": 600,
            "p0": 0.4,
            "breakout": [60.0, 120.0],
            "schedule": [{"center": 300.0, "width": 30.0}],
            "terminal_window": 60.0,
            "noise_regime_length": 200.0,
        },
        "em": {"rolling_window": 200.0, "global_steps": 3, "rolling_steps": 2, "outer_loops": 1},
        "surface": {"n_tau_bins": 8, "n_m_bins": 6, "n_basis_tau": 6, "n_basis_m": 5, "n_bootstrap": 10},
        "pricer": {
            "T": 120.0,
            "n_paths": 2000,
            "n_x": 128,
            "n_t": 64,
            "greeks": False,
            "instruments": [
                {"name": "vanilla", "kind": "vanilla"},
                {"name": "x_variance", "kind": "variance", "space": "logit"},
            ],
        },
        "bench": {"h": 20, "seeds": [3, 4]},
        "charts": {"enabled": False},
    }


@pytest.fixture
def config_file(tmp_path, small_config):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(small_config))
    return path
