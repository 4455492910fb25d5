"""
Сервис экспериментов: подкоманды gen-data, train-u, train-n, sweep, ber,
flops, probe

Каждая подкоманда читает артефакты предыдущих шагов из ArtifactRepository,
пишет свои результаты и манифест запуска (дайджест конфигурации, сиды,
версии пакетов, время, контрольные суммы).

Иерархия сидов от master_seed:
- связь для датасета / для оценки BER: CHANNEL с назначением 0 / 1
- разбиение кадров: SPLIT
- обучение U / N: INIT с назначением 0 / 1
- направления пробы: PROBE с номером направления
"""

from __future__ import annotations

import logging
import platform
import time
from datetime import datetime, timezone
from enum import IntEnum
from importlib import metadata
from typing import Any, Optional, Sequence

import numpy as np

from xai_chest.config import config_digest
from xai_chest.models.estimation_models import StaParams
from xai_chest.models.eval_models import LinkConfig, LinkResult
from xai_chest.models.experiment_models import ExperimentConfig, RunManifest
from xai_chest.models.nn_models import Mlp
from xai_chest.models.phy_models import FrameSpec, HpaModel
from xai_chest.models.xai_models import AggregatedMask, RelevanceSet
from xai_chest.repos.results_repos import (
    ArtifactRepository,
    ber_table,
    flops_table,
    histogram_table,
    mask_table,
    probe_table,
    sweep_table,
)
from xai_chest.services.channel_service import make_profile
from xai_chest.services.dataset_service import gen_data
from xai_chest.services.eval_service import ber_confidence, count_flops, noise_weight_histogram, pilot_rank_quartile
from xai_chest.services.link_service import LinkEvaluator, ber_curve, run_link
from xai_chest.services.neural_service import evaluate_mse, train_u
from xai_chest.services.phy_service import make_frame_spec, make_scheme
from xai_chest.services.xai_service import (
    classify_subcarriers,
    compute_masks,
    filter_dataset,
    loss_landscape_probe,
    mean_aggregated_mask,
    threshold_sweep,
    train_n_model,
)
from xai_chest.utils.seeding import SeedStream, derive_seed

logger = logging.getLogger(__name__)

_VERSIONED_PACKAGES = ("numpy", "scipy", "pydantic", "polars", "orjson", "PyYAML")


class LinkPurpose(IntEnum):
    DATASET = 0
    EVAL = 1


class TrainPurpose(IntEnum):
    U_MODEL = 0
    N_MODEL = 1


def package_versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in _VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def link_seed(config: ExperimentConfig, purpose: LinkPurpose) -> int:
    return derive_seed(config.master_seed, SeedStream.CHANNEL, int(purpose))


def train_seed(config: ExperimentConfig, purpose: TrainPurpose) -> int:
    return derive_seed(config.master_seed, SeedStream.INIT, int(purpose))


def build_link_config(
    config: ExperimentConfig,
    purpose: LinkPurpose,
    snr_grid_db: Optional[Sequence[float]] = None,
    n_frames: Optional[int] = None,
    model: Optional[Mlp] = None,
    relevance: Optional[RelevanceSet] = None,
) -> LinkConfig:
    """
    Конфигурация линии из секций эксперимента

    Args:
        config: конфигурация эксперимента
        purpose: датасет или оценка BER (разные потоки сидов)
        snr_grid_db: сетка SNR; по умолчанию eval.snr_grid_db
        n_frames: кадров на точку SNR; по умолчанию eval.n_frames
        model: U-модель после классического оценщика
        relevance: Ψ, если U обучена на подмножестве поднесущих
    """
    frame = config.frame
    return LinkConfig(
        spec=make_frame_spec(frame.n_symbols, frame.n_preambles, frame.k_cp, frame.sample_rate_hz),
        scheme=make_scheme(config.modulation.scheme),
        profile=make_profile(config.channel.profile, config.channel.doppler_hz),
        hpa=HpaModel(kind=config.hpa.kind, ibo_db=config.hpa.ibo_db, smoothness=config.hpa.smoothness),
        estimator=config.estimator.kind,
        sta=StaParams(
            alpha=config.estimator.alpha,
            beta=config.estimator.beta,
            sta_track=config.estimator.sta_track,
        ),
        model=model,
        relevance=relevance,
        feedback_fnn=config.eval.feedback_fnn,
        snr_grid_db=tuple(config.eval.snr_grid_db if snr_grid_db is None else snr_grid_db),
        n_frames=config.eval.n_frames if n_frames is None else n_frames,
        seed=link_seed(config, purpose),
    )


class ExperimentService:
    """Подкоманды одного эксперимента над общим каталогом артефактов"""

    def __init__(
        self,
        config: ExperimentConfig,
        repo: ArtifactRepository,
        workers: int = 1,
        progress: bool = False,
    ) -> None:
        self.config = config
        self.repo = repo
        self.workers = workers
        self.progress = progress
        self.digest = config_digest(config)

    @property
    def spec(self) -> FrameSpec:
        return build_link_config(self.config, LinkPurpose.EVAL).spec

    @property
    def k_on(self) -> int:
        return self.spec.k_on

    def _seeds(self) -> dict[str, int]:
        return {
            "master": self.config.master_seed,
            "link_dataset": link_seed(self.config, LinkPurpose.DATASET),
            "link_eval": link_seed(self.config, LinkPurpose.EVAL),
            "split": derive_seed(self.config.master_seed, SeedStream.SPLIT),
            "train_u": train_seed(self.config, TrainPurpose.U_MODEL),
            "train_n": train_seed(self.config, TrainPurpose.N_MODEL),
        }

    def record_run(self, command: str, started_at: str, t0: float, artifacts: dict[str, Any], summary: dict) -> dict:
        manifest = RunManifest(
            command=command,
            config_digest=self.digest,
            master_seed=self.config.master_seed,
            config=self.config.model_dump(mode="json", by_alias=True),
            seeds=self._seeds(),
            versions=package_versions(),
            started_at=started_at,
            wall_time_s=round(time.perf_counter() - t0, 3),
            artifacts={name: str(path) for name, path in artifacts.items()},
            summary=summary,
        )
        self.repo.write_manifest(manifest)
        logger.info(
            f"{command} finished in {manifest.wall_time_s:.1f} s",
            extra={"command": command, "config_digest": self.digest},
        )
        return summary

    @staticmethod
    def start_clock() -> tuple[str, float]:
        return datetime.now(timezone.utc).isoformat(timespec="seconds"), time.perf_counter()

    # --- данные и обучение -------------------------------------------------

    def gen_data(self) -> dict:
        """Кэши train/test на обучающем SNR"""
        started_at, t0 = self.start_clock()
        ds = self.config.dataset
        link = build_link_config(self.config, LinkPurpose.DATASET)
        train, test = gen_data(
            link,
            ds.train_snr_db,
            ds.n_frames,
            train_fraction=ds.train_fraction,
            split_seed=derive_seed(self.config.master_seed, SeedStream.SPLIT),
            workers=self.workers,
            progress=self.progress,
        )
        artifacts = {
            "train": self.repo.save_dataset("train", train),
            "test": self.repo.save_dataset("test", test),
        }
        summary = {"train_rows": len(train), "test_rows": len(test), "d_in": train.d_in, "d_out": train.d_out}
        return self.record_run("gen-data", started_at, t0, artifacts, summary)

    def train_u(self) -> dict:
        started_at, t0 = self.start_clock()
        train = self.repo.load_dataset("train")
        test = self.repo.load_dataset("test")
        arch = (train.d_in, *self.config.training_u.hidden_layers, train.d_out)
        tc = self.config.training_u.to_train_config(train_seed(self.config, TrainPurpose.U_MODEL))
        model, history = train_u(train, arch, tc, progress=self.progress)
        artifacts = {"u_model": self.repo.save_model("u_model", model)}
        summary = {
            "layer_dims": list(model.layer_dims),
            "epochs_run": len(history.losses),
            "stopped_early": history.stopped_early,
            "train_mse": evaluate_mse(model, train),
            "test_mse": evaluate_mse(model, test),
        }
        return self.record_run("train-u", started_at, t0, artifacts, summary)

    def train_n(self) -> dict:
        """N-модель при замороженной U, маски шума и их гистограмма"""
        started_at, t0 = self.start_clock()
        u_model = self.repo.load_model("u_model", "train-u")
        train = self.repo.load_dataset("train")
        test = self.repo.load_dataset("test")
        tc = self.config.training_n.to_train_config(train_seed(self.config, TrainPurpose.N_MODEL))
        n_model, history = train_n_model(u_model, train, tc, progress=self.progress)
        spec = build_link_config(self.config, LinkPurpose.EVAL).spec

        mean_mask = mean_aggregated_mask(n_model, train, spec.k_on)
        _, test_masks = compute_masks(n_model, test, spec.k_on)
        hist = noise_weight_histogram(test_masks, self.config.eval.histogram_bins, spec)
        artifacts = {
            "n_model": self.repo.save_model("n_model", n_model),
            "masks": self.repo.write_table("masks", mask_table(mean_mask, spec)),
            "histogram": self.repo.write_table("histogram", histogram_table(hist)),
        }
        summary = {
            "lambda": tc.lam,
            "epochs_run": len(history.losses),
            "final_loss": history.losses[-1] if history.losses else None,
            "mean_weight": float(mean_mask.values.mean()),
            "pilots_in_lowest_quartile": pilot_rank_quartile(mean_mask, spec),
        }
        return self.record_run("train-n", started_at, t0, artifacts, summary)

    def mean_mask(self) -> AggregatedMask:
        n_model = self.repo.load_model("n_model", "train-n")
        return mean_aggregated_mask(n_model, self.repo.load_dataset("train"), self.k_on)

    # --- подбор порога и оценка BER ------------------------------------

    def sweep(self) -> dict:
        """Подбор γ по средней маске обучающего набора"""
        started_at, t0 = self.start_clock()
        u_model = self.repo.load_model("u_model", "train-u")
        n_model = self.repo.load_model("n_model", "train-n")
        train = self.repo.load_dataset("train")
        mask = mean_aggregated_mask(n_model, train, self.k_on)
        evaluator = LinkEvaluator(build_link_config(self.config, LinkPurpose.EVAL), self.config.sweep.eval_snr_db)
        tc = self.config.training_u.to_train_config(train_seed(self.config, TrainPurpose.U_MODEL))
        outcome = threshold_sweep(
            self.config.training_u.hidden_layers,
            train,
            mask,
            self.config.sweep.gammas,
            tc,
            evaluator,
            baseline_model=u_model,
            workers=self.workers,
            progress=self.progress,
        )
        result = outcome.result
        artifacts = {"sweep": self.repo.write_table("sweep", sweep_table(result))}
        selected = result.selected
        if not result.no_improvement and result.selected_gamma is not None:
            model = outcome.models[(result.selected_gamma, "relevant")]
            rel = classify_subcarriers(mask, result.selected_gamma)
            artifacts["u_relevant"] = self.repo.save_model("u_relevant", model)
            artifacts["relevance"] = self.repo.save_relevance(rel)
        summary = {
            "ber_full": result.ber_full,
            "selected_gamma": result.selected_gamma,
            "n_relevant": selected.n_relevant if selected else None,
            "ber_selected": selected.ber_relevant if selected else None,
            "no_improvement": result.no_improvement,
        }
        return self.record_run("sweep", started_at, t0, artifacts, summary)

    def ber(self, genie: bool = False) -> dict:
        """
        Кривые BER: классический оценщик, U на всех входах и, если подбор γ
        уже выполнен, U на Ψ
        """
        started_at, t0 = self.start_clock()
        base = build_link_config(self.config, LinkPurpose.EVAL)
        curves = {"conventional": ber_curve(base, self.digest, self.workers, self.progress)}
        if genie:
            curves["genie"] = ber_curve(base.model_copy(update={"genie": True}), self.digest, self.workers)
        u_model = self.repo.load_model("u_model", "train-u")
        curves["fnn_full"] = ber_curve(
            build_link_config(self.config, LinkPurpose.EVAL, model=u_model), self.digest, self.workers, self.progress
        )
        relevance = self.repo.load_relevance()
        if relevance is not None and self.repo.has_model("u_relevant"):
            u_relevant = self.repo.load_model("u_relevant", "sweep")
            curves["fnn_relevant"] = ber_curve(
                build_link_config(self.config, LinkPurpose.EVAL, model=u_relevant, relevance=relevance),
                self.digest,
                self.workers,
                self.progress,
            )
        primary = "fnn_relevant" if "fnn_relevant" in curves else "fnn_full"
        artifacts = {"ber": self.repo.write_table("ber", ber_table(curves[primary]))}
        for name, curve in curves.items():
            artifacts[f"ber_{name}"] = self.repo.write_table(f"ber_{name}", ber_table(curve))
        summary = {
            "primary": primary,
            "ber_at_max_snr": {name: c.points[-1].ber for name, c in curves.items()},
            "ci95_at_max_snr": {
                name: list(ber_confidence(c.points[-1].bit_errors, c.points[-1].total_bits)) for name, c in curves.items()
            },
        }
        for name, (low, high) in summary["ci95_at_max_snr"].items():
            last = curves[name].points[-1]
            logger.info(f"BER {name} @ {last.snr_db} dB: {last.ber:.3e} [{low:.3e}, {high:.3e}]")
        return self.record_run("ber", started_at, t0, artifacts, summary)

    # --- сложность и проба ландшафта ---------------------------------------

    def architectures(self) -> list[tuple[int, ...]]:
        """Полная U и уменьшенные архитектуры на входе Ψ (или на пилотах, если Ψ не выбрано)"""
        k_on = self.k_on
        relevance = self.repo.load_relevance()
        if relevance is not None:
            d_in = 2 * relevance.size
        else:
            d_in = 2 * len(build_link_config(self.config, LinkPurpose.EVAL).spec.pilot_indices)
        full = (2 * k_on, *self.config.training_u.hidden_layers, 2 * k_on)
        return [full] + [(d_in, *hidden, 2 * k_on) for hidden in self.config.suite.architectures]

    def flops(self, dims: Optional[Sequence[Sequence[int]]] = None) -> dict:
        started_at, t0 = self.start_clock()
        layer_dims = [tuple(d) for d in dims] if dims else self.architectures()
        reports = [count_flops(d) for d in layer_dims]
        artifacts = {"flops": self.repo.write_table("flops", flops_table(reports))}
        summary = {"-".join(map(str, r.layer_dims)): r.total for r in reports}
        for r in reports:
            logger.info(f"FLOPS {r.layer_dims}: {r.total} (+{r.activation_total} activation ops)")
        return self.record_run("flops", started_at, t0, artifacts, summary)

    def probe(self) -> dict:
        """Сужение L_U на случайные прямые через обученную U"""
        started_at, t0 = self.start_clock()
        u_model = self.repo.load_model("u_model", "train-u")
        train = self.repo.load_dataset("train")
        cfg = self.config.probe
        t_grid = np.linspace(cfg.t_min, cfg.t_max, cfg.n_points)
        results = [
            loss_landscape_probe(
                u_model,
                train,
                derive_seed(self.config.master_seed, SeedStream.PROBE, j),
                t_grid,
                max_rows=cfg.max_rows,
            )
            for j in range(cfg.n_directions)
        ]
        artifacts = {"probe": self.repo.write_table("probe", probe_table(results))}
        summary = {
            "directions": cfg.n_directions,
            "violations": sum(r.violation is not None for r in results),
            "certificates": [
                r.violation.model_dump() if r.violation is not None else None for r in results
            ],
        }
        return self.record_run("probe", started_at, t0, artifacts, summary)

    # --- вспомогательное для сьютов -----------------------------------------

    def conventional_ber(self, snr_db: float) -> float:
        return run_link(build_link_config(self.config, LinkPurpose.EVAL), snr_db, workers=self.workers).ber

    def subset_ber(self, relevance: RelevanceSet, hidden_layers: Sequence[int]) -> tuple[Mlp, LinkResult]:
        """U с заданными скрытыми слоями, обученная на входе Ψ, и её BER на SNR подбора"""
        data = filter_dataset(self.repo.load_dataset("train"), relevance)
        tc = self.config.training_u.to_train_config(train_seed(self.config, TrainPurpose.U_MODEL))
        model, _ = train_u(data, (data.d_in, *hidden_layers, data.d_out), tc, progress=self.progress)
        link = build_link_config(self.config, LinkPurpose.EVAL, model=model, relevance=relevance)
        return model, run_link(link, self.config.sweep.eval_snr_db, workers=self.workers)

    def pilot_relevance(self) -> RelevanceSet:
        spec = self.spec
        return RelevanceSet.from_indices(spec.pilot_indices, spec.k_on, gamma=float("nan"))

    def pipeline(self) -> dict:
        """gen-data → train-u → train-n → sweep; сводка для таблиц сьютов"""
        self.gen_data()
        self.train_u()
        n_summary = self.train_n()
        s_summary = self.sweep()
        return {
            "mean_weight": n_summary["mean_weight"],
            "pilots_in_lowest_quartile": n_summary["pilots_in_lowest_quartile"],
            "ber_conventional": self.conventional_ber(self.config.sweep.eval_snr_db),
            **s_summary,
        }

