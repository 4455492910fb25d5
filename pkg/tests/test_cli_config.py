"""
Tests for experiment configuration, seeding, the command line and the pipeline
"""

import math
from pathlib import Path

import polars as pl
import pytest
import yaml

from xai_chest.config import Settings, config_digest, load_experiment_config, parse_experiment_config, progress_enabled
from xai_chest.main import main
from xai_chest.models.experiment_models import ExperimentConfig
from xai_chest.repos.results_repos import ArtifactRepository
from xai_chest.services.experiment_service import (
    ExperimentService,
    LinkPurpose,
    TrainPurpose,
    link_seed,
    train_seed,
)
from xai_chest.services.suite_service import SuiteService
from xai_chest.utils.errors import ArtifactIOError, ConfigurationError, UsageError
from xai_chest.utils.parallel import run_ordered
from xai_chest.utils.seeding import SeedStream, derive_seed

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def _write_config(tmp_path, data):
    path = tmp_path / "experiment.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


@pytest.mark.unit
@pytest.mark.parametrize(
    "data, where",
    [
        ({"training_u": {"epochs": -1}}, "training_u.epochs"),
        ({"frame": {"bogus": 1}}, "frame.bogus"),
        ({"sweep": {"gammas": []}}, "sweep.gammas"),
        ({"channel": {"profile": "URBAN"}}, "channel.profile"),
    ],
)
def test_config_errors_name_the_field(data, where):
    """Test validation errors carry dotted field paths"""
    with pytest.raises(ConfigurationError) as err:
        parse_experiment_config(data)
    assert where in str(err.value)
    assert err.value.exit_code == 2


@pytest.mark.unit
def test_config_must_be_mapping():
    """Test a YAML list at the top level is rejected"""
    with pytest.raises(ConfigurationError):
        parse_experiment_config([1, 2])
    assert parse_experiment_config(None) == ExperimentConfig()


@pytest.mark.unit
def test_config_file_errors(tmp_path):
    """Test broken YAML and a missing file"""
    bad = tmp_path / "bad.yaml"
    bad.write_text("frame: [1, 2\n", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_experiment_config(bad)
    with pytest.raises(ArtifactIOError):
        load_experiment_config(tmp_path / "absent.yaml")


@pytest.mark.unit
def test_lambda_alias():
    """Test the YAML key 'lambda' fills the regularization weight"""
    config = parse_experiment_config({"training_n": {"lambda": 0.02}})
    assert config.training_n.lam == 0.02
    assert config.training_n.to_train_config(seed=1).lam == 0.02


@pytest.mark.unit
@pytest.mark.parametrize("name", ["desk.yaml", "full.yaml", "lfs_pilots.yaml"])
def test_shipped_configs_load(name):
    """Test the bundled study configs are valid"""
    config = load_experiment_config(CONFIG_DIR / name)
    assert config.frame.n_symbols == 50


@pytest.mark.unit
def test_config_digest(tiny_config, tiny_config_dict):
    """Test the digest is stable, short and sensitive to content"""
    digest = config_digest(tiny_config)
    assert len(digest) == 16
    int(digest, 16)
    assert config_digest(parse_experiment_config(tiny_config_dict)) == digest
    assert config_digest(tiny_config.model_copy(update={"master_seed": 8})) != digest


@pytest.mark.unit
def test_desk_scale_and_with_section(tiny_config):
    """Test desk scaling and section overrides leave other fields alone"""
    desk = tiny_config.desk_scaled()
    assert desk.dataset.n_frames == 200
    assert desk.training_u.epochs == desk.training_n.epochs == 100
    assert desk.eval.n_frames == 200
    assert desk.training_u.hidden_layers == (6,)

    changed = tiny_config.with_section("training_n", lam=0.5)
    assert changed.training_n.lam == 0.5
    assert changed.training_n.epochs == tiny_config.training_n.epochs


@pytest.mark.unit
def test_seeds_are_separated_by_purpose(tiny_config):
    """Test dataset and evaluation links, U and N training use distinct seeds"""
    assert link_seed(tiny_config, LinkPurpose.DATASET) != link_seed(tiny_config, LinkPurpose.EVAL)
    assert train_seed(tiny_config, TrainPurpose.U_MODEL) != train_seed(tiny_config, TrainPurpose.N_MODEL)


@pytest.mark.unit
def test_derive_seed():
    """Test derived seeds are deterministic 32-bit values separated by stream and counter"""
    a = derive_seed(1, SeedStream.NOISE, 3, 4)
    assert a == derive_seed(1, SeedStream.NOISE, 3, 4)
    assert 0 <= a < 2 ** 32
    assert a != derive_seed(1, SeedStream.CHANNEL, 3, 4)
    assert a != derive_seed(1, SeedStream.NOISE, 4, 3)
    assert a != derive_seed(2, SeedStream.NOISE, 3, 4)


class _Stream:
    def __init__(self, tty):
        self.tty = tty

    def isatty(self):
        return self.tty


@pytest.mark.unit
def test_progress_needs_flag_and_terminal():
    """Test progress bars stay off without the setting or without a terminal"""
    on = Settings(XAI_CHEST_PROGRESS=True)
    off = Settings(XAI_CHEST_PROGRESS=False)
    assert progress_enabled(on, _Stream(True))
    assert not progress_enabled(on, _Stream(False))
    assert not progress_enabled(off, _Stream(True))
    assert not progress_enabled(on, object())


@pytest.mark.unit
def test_run_ordered_keeps_order():
    """Test process-parallel mapping returns results in item order"""
    items = [1.0, 4.0, 9.0, 16.0, 25.0]
    assert run_ordered(math.sqrt, items, workers=2) == [1.0, 2.0, 3.0, 4.0, 5.0]
    assert run_ordered(math.sqrt, items) == [1.0, 2.0, 3.0, 4.0, 5.0]


@pytest.mark.unit
def test_cli_flops_defaults(tmp_path):
    """Test flops runs without a config and counts the full architecture"""
    assert main(["flops", "--out", str(tmp_path)]) == 0
    table = pl.read_csv(tmp_path / "flops.csv")
    assert table["layer_dims"][0] == "104-15-15-15-104"
    assert table["total"][0] == 7289
    # without a relevance set the reduced networks take the pilots as input
    assert table["layer_dims"][1] == "8-15-15-15-104"
    assert (tmp_path / "flops.manifest.json").exists()


@pytest.mark.unit
def test_cli_flops_explicit_dims(tmp_path):
    """Test --dims replaces the architecture list"""
    assert main(["flops", "--out", str(tmp_path), "--dims", "8,5,104"]) == 0
    table = pl.read_csv(tmp_path / "flops.csv")
    assert table.height == 1
    assert table["total"][0] == 1229


@pytest.mark.unit
def test_cli_exit_codes(tmp_path, tiny_config_dict):
    """Test usage, configuration and missing-artifact failures map to exit codes"""
    config_path = _write_config(tmp_path, tiny_config_dict)
    out = str(tmp_path / "out")
    assert main([]) == 2
    assert main(["gen-data"]) == 2
    assert main(["suite", "--config", config_path, "--out", out]) == 2
    assert main(["train-u", "--config", config_path, "--out", out]) == 3
    assert main(["flops", "--out", out, "--dims", "104"]) == 1
    assert main(["flops", "--out", out, "--workers", "0"]) == 2

    bad_path = _write_config(tmp_path, {"training_u": {"epochs": "many"}})
    assert main(["gen-data", "--config", bad_path, "--out", out]) == 2


@pytest.mark.unit
def test_unknown_suite(tiny_config, tmp_path):
    """Test suite names are checked before any work starts"""
    service = SuiteService(tiny_config, ArtifactRepository(tmp_path))
    for name in ("", "nope"):
        with pytest.raises(UsageError):
            service.run(name)
    assert not (tmp_path / "suites").exists()


@pytest.mark.integration
@pytest.mark.slow
def test_tiny_pipeline(tiny_config, tmp_path):
    """Test every pipeline step on a tiny experiment and its artifacts"""
    repo = ArtifactRepository(tmp_path / "run")
    service = ExperimentService(tiny_config, repo)

    data = service.gen_data()
    assert (data["train_rows"], data["test_rows"]) == (20, 4)
    assert (data["d_in"], data["d_out"]) == (104, 104)
    train, test = repo.load_dataset("train"), repo.load_dataset("test")
    assert set(train.meta["frames"]).isdisjoint(test.meta["frames"])
    assert sorted(train.meta["frames"] + test.meta["frames"]) == list(range(6))

    u_summary = service.train_u()
    assert u_summary["layer_dims"] == [104, 6, 104]
    assert u_summary["epochs_run"] == 3

    n_summary = service.train_n()
    assert 0.0 < n_summary["mean_weight"] < 1.0
    assert repo.read_table("masks", "train-n").height == 52
    assert repo.read_table("histogram", "train-n").height == 5

    sweep = service.sweep()
    table = repo.read_table("sweep", "sweep")
    assert table.height == 3
    assert table["selected"].sum() == 1
    assert isinstance(sweep["no_improvement"], bool)

    service.ber()
    assert repo.read_table("ber", "ber")["snr_db"].to_list() == [20.0, 30.0]
    assert repo.path("ber_conventional.csv").exists()
    assert repo.path("ber_fnn_full.csv").exists()

    probe = service.probe()
    assert probe["directions"] == 1
    assert repo.read_table("probe", "probe").height == 7

    service.flops()
    assert repo.read_table("flops", "flops").height == 3

    for command in ("gen-data", "train-u", "train-n", "sweep", "ber", "probe", "flops"):
        manifest = repo.read_json(f"{command}.manifest", command)
        assert manifest["config_digest"] == service.digest
        assert manifest["master_seed"] == 7
        assert set(manifest["checksums"]) <= set(manifest["artifacts"])


@pytest.mark.integration
@pytest.mark.slow
def test_dataset_regeneration_is_byte_identical(tiny_config, tmp_path):
    """Test the same config regenerates identical dataset caches"""
    first = ArtifactRepository(tmp_path / "a")
    second = ArtifactRepository(tmp_path / "b")
    ExperimentService(tiny_config, first).gen_data()
    ExperimentService(tiny_config, second, workers=2).gen_data()
    for part in ("train", "test"):
        assert first.path(f"data/{part}.xcds").read_bytes() == second.path(f"data/{part}.xcds").read_bytes()


@pytest.mark.integration
@pytest.mark.slow
def test_threshold_suite(tiny_config, tmp_path):
    """Test the threshold suite writes its summary and lambda tables"""
    suite_repo = SuiteService(tiny_config, ArtifactRepository(tmp_path)).run("threshold")
    summary = suite_repo.read_table("summary", "suite threshold")
    assert summary["variant"].to_list() == ["base"]
    lam = suite_repo.read_table("lambda", "suite threshold")
    assert lam["lambda"].to_list() == [0.001, 0.1]
    assert suite_repo.path("suite-threshold.manifest.json").exists()


@pytest.mark.integration
@pytest.mark.slow
def test_threshold_suite_rerun_is_byte_identical(tiny_config, tmp_path):
    """Test two runs of the threshold suite with the same seed write identical tables"""
    first = SuiteService(tiny_config, ArtifactRepository(tmp_path / "a")).run("threshold")
    second = SuiteService(tiny_config, ArtifactRepository(tmp_path / "b")).run("threshold")
    for name in ("summary.csv", "lambda.csv"):
        assert first.path(name).read_bytes() == second.path(name).read_bytes()
