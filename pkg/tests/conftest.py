"""
Pytest configuration and fixtures
"""

import numpy as np
import pytest

from xai_chest.config import get_settings, parse_experiment_config
from xai_chest.models.nn_models import Dataset
from xai_chest.repos.results_repos import ArtifactRepository
from xai_chest.services.phy_service import make_frame_spec, make_scheme


@pytest.fixture(autouse=True)
def fresh_settings():
    """Settings are cached per process; tests that patch the environment need a clean cache"""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def spec():
    """802.11p frame numerology with the default 50 data symbols"""
    return make_frame_spec()


@pytest.fixture
def short_spec():
    """Same numerology, four data symbols per frame"""
    return make_frame_spec(n_symbols=4)


@pytest.fixture
def qpsk():
    return make_scheme("QPSK")


@pytest.fixture(params=["QPSK", "QAM16", "QAM64"])
def scheme(request):
    """Every supported modulation scheme"""
    return make_scheme(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def tiny_dataset(rng):
    """64 rows of stacked 52-subcarrier estimates and targets"""
    x = rng.standard_normal((64, 104))
    t = x + 0.1 * rng.standard_normal((64, 104))
    return Dataset(inputs=x, targets=t, meta={"part": "train"})


@pytest.fixture
def repo(tmp_path):
    """Artifact repository rooted in a temporary directory"""
    return ArtifactRepository(tmp_path / "run")


@pytest.fixture
def tiny_config_dict(tmp_path):
    """Smallest experiment that still runs every pipeline step"""
    return {
        "master_seed": 7,
        "frame": {"n_symbols": 4},
        "channel": {"profile": "VTV_SDWW", "doppler_hz": 500.0},
        "modulation": {"scheme": "QPSK"},
        "estimator": {"kind": "STA"},
        "dataset": {"n_frames": 6, "train_fraction": 0.8, "train_snr_db": 30.0},
        "training_u": {"hidden_layers": [6], "epochs": 3, "batch_size": 8, "learning_rate": 0.005},
        "training_n": {"hidden_layers": [6], "epochs": 2, "batch_size": 8, "lambda": 0.01},
        "sweep": {"gammas": [0.5, 1.0], "eval_snr_db": 30.0},
        "eval": {"snr_grid_db": [20.0, 30.0], "n_frames": 2, "histogram_bins": 5},
        "probe": {"t_min": -1.0, "t_max": 1.0, "n_points": 7, "n_directions": 1, "max_rows": 10},
        "suite": {
            "train_snr_grid_db": [10.0, 30.0],
            "architectures": [[4], [2]],
            "n_seeds": 1,
            "lambda_grid": [0.001, 0.1],
        },
        "paths": {"out_dir": str(tmp_path / "runs")},
    }


@pytest.fixture
def tiny_config(tiny_config_dict):
    return parse_experiment_config(tiny_config_dict)
