"""
Сьюты экспериментов

Каждый сьют прогоняет полный конвейер (данные → U → N → подбор γ) для
набора вариантов конфигурации и сводит результаты в suites/<name>/:

- threshold: базовый прогон и чувствительность маски к λ
- modulation: QPSK / 16QAM / 64QAM
- selectivity: сильная (VTV_SDWW) и слабая (VTV_EX) частотная селективность,
  плюс U только на пилотах
- nonlinear: линейный усилитель и Rapp при заданном IBO
- train_snr: средний вес шума по обучающему SNR и сидам, тренд Спирмена
- estimators: DPA / STA / TRFI перед U
- arch_reduction: уменьшенные архитектуры на пилотном входе, FLOPS и BER
"""

from __future__ import annotations

import logging
from typing import Any, Callable

import polars as pl

from xai_chest.models.channel_models import ChannelProfileName
from xai_chest.models.estimation_models import EstimatorKind
from xai_chest.models.experiment_models import ExperimentConfig
from xai_chest.models.phy_models import HpaKind, ModulationName
from xai_chest.repos.results_repos import ArtifactRepository, flops_table
from xai_chest.services.eval_service import count_flops, pilot_rank_quartile, spearman_trend
from xai_chest.services.experiment_service import (
    ExperimentService,
    LinkPurpose,
    TrainPurpose,
    build_link_config,
    train_seed,
)
from xai_chest.services.link_service import run_link
from xai_chest.services.xai_service import mean_aggregated_mask, train_n_model
from xai_chest.utils.errors import UsageError

logger = logging.getLogger(__name__)

SUITES = ("threshold", "modulation", "selectivity", "nonlinear", "train_snr", "estimators", "arch_reduction")

_SUMMARY_COLUMNS = (
    "variant",
    "mean_weight",
    "pilots_in_lowest_quartile",
    "ber_conventional",
    "ber_full",
    "selected_gamma",
    "n_relevant",
    "ber_selected",
    "no_improvement",
)


def _table(rows: list[dict[str, Any]], columns: tuple[str, ...]) -> pl.DataFrame:
    return pl.DataFrame([{c: row.get(c) for c in columns} for row in rows], infer_schema_length=None)


class SuiteService:
    """Запуск именованных сьютов поверх ExperimentService"""

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

    def run(self, name: str) -> ArtifactRepository:
        """
        Запуск сьюта

        Args:
            name: одно из SUITES

        Returns:
            Репозиторий каталога suites/<name>
        """
        if not name or name not in SUITES:
            raise UsageError(f"unknown suite '{name}'; choose one of {', '.join(SUITES)}")
        handler: Callable[[ArtifactRepository], dict] = getattr(self, f"_suite_{name}")
        suite_repo = self.repo.child(f"suites/{name}")
        root = ExperimentService(self.config, suite_repo, self.workers, self.progress)
        started_at, t0 = root.start_clock()
        logger.info(f"Suite '{name}' started", extra={"command": f"suite-{name}", "config_digest": root.digest})
        summary = handler(suite_repo)
        root.record_run(f"suite-{name}", started_at, t0, summary.pop("_artifacts", {}), summary)
        return suite_repo

    def _experiment(self, repo: ArtifactRepository, config: ExperimentConfig) -> ExperimentService:
        return ExperimentService(config, repo, self.workers, self.progress)

    def _variants(self, suite_repo: ArtifactRepository, variants: dict[str, ExperimentConfig]) -> dict:
        rows = []
        for variant, config in variants.items():
            logger.info(f"Variant '{variant}'")
            summary = self._experiment(suite_repo.child(variant), config).pipeline()
            rows.append({"variant": variant, **summary})
        path = suite_repo.write_table("summary", _table(rows, _SUMMARY_COLUMNS))
        return {"variants": rows, "_artifacts": {"summary": path}}

    # --- сьюты ---------------------------------------------------------------

    def _suite_threshold(self, suite_repo: ArtifactRepository) -> dict:
        """Базовый прогон + маска при разных λ на тех же данных и U"""
        result = self._variants(suite_repo, {"base": self.config})
        base = self._experiment(suite_repo.child("base"), self.config)
        u_model = base.repo.load_model("u_model", "train-u")
        train = base.repo.load_dataset("train")
        spec = base.spec
        rows = []
        for lam in self.config.suite.lambda_grid:
            config = self.config.with_section("training_n", lam=lam)
            tc = config.training_n.to_train_config(train_seed(config, TrainPurpose.N_MODEL))
            n_model, _ = train_n_model(u_model, train, tc, progress=self.progress)
            mask = mean_aggregated_mask(n_model, train, spec.k_on)
            rows.append(
                {
                    "lambda": float(lam),
                    "mean_weight": float(mask.values.mean()),
                    "pilots_in_lowest_quartile": pilot_rank_quartile(mask, spec),
                }
            )
            logger.info(f"lambda={lam:g}: mean weight {rows[-1]['mean_weight']:.3f}")
        path = suite_repo.write_table("lambda", pl.DataFrame(rows))
        result["_artifacts"]["lambda"] = path
        result["lambda"] = rows
        return result

    def _suite_modulation(self, suite_repo: ArtifactRepository) -> dict:
        variants = {
            name.value: self.config.with_section("modulation", scheme=name)
            for name in (ModulationName.QPSK, ModulationName.QAM16, ModulationName.QAM64)
        }
        return self._variants(suite_repo, variants)

    def _suite_selectivity(self, suite_repo: ArtifactRepository) -> dict:
        """HFS и LFS; для каждого дополнительно U только на пилотах"""
        variants = {
            "HFS": self.config.with_section("channel", profile=ChannelProfileName.VTV_SDWW),
            "LFS": self.config.with_section("channel", profile=ChannelProfileName.VTV_EX),
        }
        result = self._variants(suite_repo, variants)
        rows = []
        for variant, config in variants.items():
            exp = self._experiment(suite_repo.child(variant), config)
            _, link = exp.subset_ber(exp.pilot_relevance(), config.training_u.hidden_layers)
            full = next(r for r in result["variants"] if r["variant"] == variant)
            rows.append({"variant": variant, "ber_pilots_only": link.ber, "ber_full": full["ber_full"]})
            logger.info(f"{variant}: pilots-only BER {link.ber:.4e} vs full {full['ber_full']:.4e}")
        result["_artifacts"]["pilots_only"] = suite_repo.write_table("pilots_only", pl.DataFrame(rows))
        result["pilots_only"] = rows
        return result

    def _suite_nonlinear(self, suite_repo: ArtifactRepository) -> dict:
        variants = {
            "linear": self.config.with_section("hpa", kind=HpaKind.LINEAR),
            f"rapp_ibo{self.config.hpa.ibo_db:g}": self.config.with_section("hpa", kind=HpaKind.RAPP),
        }
        return self._variants(suite_repo, variants)

    def _suite_estimators(self, suite_repo: ArtifactRepository) -> dict:
        variants = {
            kind.value: self.config.with_section("estimator", kind=kind)
            for kind in (EstimatorKind.DPA, EstimatorKind.STA, EstimatorKind.TRFI)
        }
        return self._variants(suite_repo, variants)

    def _suite_train_snr(self, suite_repo: ArtifactRepository) -> dict:
        """Средний вес шума против обучающего SNR; без подбора γ"""
        rows = []
        trends = []
        grid = self.config.suite.train_snr_grid_db
        for s in range(self.config.suite.n_seeds):
            seed = self.config.master_seed + s
            weights = []
            for snr_db in grid:
                config = self.config.with_section("dataset", train_snr_db=snr_db).model_copy(
                    update={"master_seed": seed}
                )
                exp = self._experiment(suite_repo.child(f"seed{s}/snr{snr_db:g}"), config)
                exp.gen_data()
                exp.train_u()
                summary = exp.train_n()
                weights.append(summary["mean_weight"])
                rows.append(
                    {
                        "seed": seed,
                        "train_snr_db": float(snr_db),
                        "mean_weight": summary["mean_weight"],
                        "pilots_in_lowest_quartile": summary["pilots_in_lowest_quartile"],
                    }
                )
            rho = spearman_trend(list(grid), weights)
            trends.append({"seed": seed, "spearman": rho})
            logger.info(f"seed {seed}: Spearman(train SNR, mean weight) = {rho:.3f}")
        return {
            "trends": trends,
            "_artifacts": {
                "train_snr": suite_repo.write_table("train_snr", pl.DataFrame(rows)),
                "trend": suite_repo.write_table("trend", pl.DataFrame(trends)),
            },
        }

    def _suite_arch_reduction(self, suite_repo: ArtifactRepository) -> dict:
        """Полная U против уменьшенных сетей на входе из пилотов"""
        exp = self._experiment(suite_repo.child("base"), self.config)
        exp.gen_data()
        exp.train_u()
        pilots = exp.pilot_relevance()
        k_on = exp.k_on
        full_dims = (2 * k_on, *self.config.training_u.hidden_layers, 2 * k_on)
        u_model = exp.repo.load_model("u_model", "train-u")
        full = run_link(
            build_link_config(self.config, LinkPurpose.EVAL, model=u_model),
            self.config.sweep.eval_snr_db,
            workers=self.workers,
        )
        rows = [
            {
                "architecture": "full",
                "layer_dims": "-".join(map(str, full_dims)),
                "flops": count_flops(full_dims).total,
                "ber": full.ber,
                "mse_channel": full.mse_channel,
            }
        ]
        dims = [full_dims]
        for hidden in self.config.suite.architectures:
            model, link = exp.subset_ber(pilots, hidden)
            dims.append(model.layer_dims)
            rows.append(
                {
                    "architecture": "-".join(map(str, hidden)),
                    "layer_dims": "-".join(map(str, model.layer_dims)),
                    "flops": count_flops(model.layer_dims).total,
                    "ber": link.ber,
                    "mse_channel": link.mse_channel,
                }
            )
            logger.info(f"Architecture {hidden}: {rows[-1]['flops']} FLOPS, BER {link.ber:.4e}")
        return {
            "architectures": rows,
            "_artifacts": {
                "arch": suite_repo.write_table("arch", pl.DataFrame(rows)),
                "flops": suite_repo.write_table("flops", flops_table(count_flops(d) for d in dims)),
            },
        }
