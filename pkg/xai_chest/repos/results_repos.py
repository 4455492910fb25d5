"""
Репозиторий артефактов эксперимента

Раскладка каталога вывода:
- data/train.xcds, data/test.xcds - кэши датасета
- models/*.mlp - U- и N-модели
- *.csv - таблицы результатов (LF, десятичная точка, строка заголовка)
- <command>.manifest.json - манифест запуска с контрольными суммами
- relevance.json - выбранное множество Ψ
- suites/<name>/ - вложенные репозитории сьютов
"""

from __future__ import annotations

import hashlib
import logging
from pathlib import Path
from typing import Iterable, Optional, Union

import orjson
import polars as pl

from xai_chest.models.eval_models import BerCurve, FlopsReport, NoiseHistogram
from xai_chest.models.experiment_models import RunManifest
from xai_chest.models.nn_models import Dataset, Mlp
from xai_chest.models.phy_models import FrameSpec
from xai_chest.models.xai_models import AggregatedMask, ProbeResult, RelevanceSet, SweepResult
from xai_chest.repos.dataset_repos import load_dataset, save_dataset
from xai_chest.repos.model_repos import load_model, save_model
from xai_chest.utils.errors import ArtifactIOError, MissingArtifactError

logger = logging.getLogger(__name__)

_JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY


def sweep_table(result: SweepResult) -> pl.DataFrame:
    return pl.DataFrame(
        {
            "gamma": [r.gamma for r in result.records],
            "n_relevant": [r.n_relevant for r in result.records],
            "ber_relevant": [r.ber_relevant for r in result.records],
            "ber_irrelevant": [r.ber_irrelevant for r in result.records],
            "ber_full": [r.ber_full for r in result.records],
            "mse": [r.mse for r in result.records],
            "selected": [int(r.selected) for r in result.records],
        },
        schema={
            "gamma": pl.Float64,
            "n_relevant": pl.Int64,
            "ber_relevant": pl.Float64,
            "ber_irrelevant": pl.Float64,
            "ber_full": pl.Float64,
            "mse": pl.Float64,
            "selected": pl.Int64,
        },
    )


def ber_table(curve: BerCurve) -> pl.DataFrame:
    return pl.DataFrame(
        {
            "snr_db": [p.snr_db for p in curve.points],
            "bit_errors": [p.bit_errors for p in curve.points],
            "total_bits": [p.total_bits for p in curve.points],
            "ber": [p.ber for p in curve.points],
            "mse_channel": [p.mse_channel for p in curve.points],
            "config_digest": [curve.config_digest] * len(curve.points),
        },
        schema={
            "snr_db": pl.Float64,
            "bit_errors": pl.Int64,
            "total_bits": pl.Int64,
            "ber": pl.Float64,
            "mse_channel": pl.Float64,
            "config_digest": pl.Utf8,
        },
    )


def histogram_table(hist: NoiseHistogram) -> pl.DataFrame:
    return pl.DataFrame(
        {
            "bin_low": hist.edges[:-1],
            "bin_high": hist.edges[1:],
            "count_data": hist.count_data,
            "count_pilot": hist.count_pilot,
        },
        schema={"bin_low": pl.Float64, "bin_high": pl.Float64, "count_data": pl.Int64, "count_pilot": pl.Int64},
    )


def mask_table(mask: AggregatedMask, spec: FrameSpec) -> pl.DataFrame:
    """Строка на активную поднесущую: позиция в k_on, вес шума, признак пилота"""
    pilots = set(int(p) for p in spec.pilot_indices)
    return pl.DataFrame(
        {
            "subcarrier_index": list(range(len(mask))),
            "weight": [float(v) for v in mask.values],
            "is_pilot": [int(k in pilots) for k in range(len(mask))],
        },
        schema={"subcarrier_index": pl.Int64, "weight": pl.Float64, "is_pilot": pl.Int64},
    )


def flops_table(reports: Iterable[FlopsReport]) -> pl.DataFrame:
    reports = list(reports)
    return pl.DataFrame(
        {
            "layer_dims": ["-".join(str(d) for d in r.layer_dims) for r in reports],
            "multiply_adds": [sum(layer.multiply_adds for layer in r.layers) for r in reports],
            "bias_adds": [sum(layer.bias_adds for layer in r.layers) for r in reports],
            "total": [r.total for r in reports],
            "activation_ops": [r.activation_total for r in reports],
        },
        schema={
            "layer_dims": pl.Utf8,
            "multiply_adds": pl.Int64,
            "bias_adds": pl.Int64,
            "total": pl.Int64,
            "activation_ops": pl.Int64,
        },
    )


def probe_table(results: Iterable[ProbeResult]) -> pl.DataFrame:
    rows = [(r.direction_seed, t, g) for r in results for t, g in zip(r.t, r.g)]
    return pl.DataFrame(
        {
            "direction_seed": [row[0] for row in rows],
            "t": [row[1] for row in rows],
            "g": [row[2] for row in rows],
        },
        schema={"direction_seed": pl.Int64, "t": pl.Float64, "g": pl.Float64},
    )


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


class ArtifactRepository:
    """Репозиторий артефактов одного каталога вывода"""

    def __init__(self, root: Union[str, Path]) -> None:
        self.root = Path(root)

    def path(self, relative: str) -> Path:
        return self.root / relative

    def child(self, name: str) -> "ArtifactRepository":
        """Вложенный репозиторий (например, suites/<name>/<variant>)"""
        return ArtifactRepository(self.root / name)

    def require(self, relative: str, producer: str) -> Path:
        """Путь к артефакту предыдущего шага; ошибка называет команду-источник"""
        path = self.path(relative)
        if not path.exists():
            raise MissingArtifactError(str(path), producer)
        return path

    def save_dataset(self, part: str, dataset: Dataset) -> Path:
        return save_dataset(dataset, self.path(f"data/{part}.xcds"))

    def load_dataset(self, part: str) -> Dataset:
        return load_dataset(self.require(f"data/{part}.xcds", "gen-data"))

    def save_model(self, name: str, model: Mlp) -> Path:
        return save_model(model, self.path(f"models/{name}.mlp"))

    def load_model(self, name: str, producer: str) -> Mlp:
        return load_model(self.require(f"models/{name}.mlp", producer))

    def has_model(self, name: str) -> bool:
        return self.path(f"models/{name}.mlp").exists()

    def write_table(self, name: str, frame: pl.DataFrame) -> Path:
        path = self.path(f"{name}.csv")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.write_csv(path, line_terminator="\n")
        except OSError as e:
            raise ArtifactIOError(f"cannot write table {path}: {e}") from e
        logger.debug(f"Wrote {frame.height} rows to {path}")
        return path

    def read_table(self, name: str, producer: str) -> pl.DataFrame:
        return pl.read_csv(self.require(f"{name}.csv", producer))

    def write_json(self, name: str, payload: dict) -> Path:
        path = self.path(f"{name}.json")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(orjson.dumps(payload, option=_JSON_OPTIONS))
        except OSError as e:
            raise ArtifactIOError(f"cannot write {path}: {e}") from e
        return path

    def read_json(self, name: str, producer: str) -> dict:
        path = self.require(f"{name}.json", producer)
        try:
            return orjson.loads(path.read_bytes())
        except (OSError, orjson.JSONDecodeError) as e:
            raise ArtifactIOError(f"cannot read {path}: {e}") from e

    def save_relevance(self, relevance: RelevanceSet) -> Path:
        return self.write_json("relevance", relevance.model_dump(mode="json"))

    def load_relevance(self) -> Optional[RelevanceSet]:
        if not self.path("relevance.json").exists():
            return None
        payload = self.read_json("relevance", "sweep")
        if payload.get("gamma") is None:
            # NaN-порог (Ψ задан списком) сериализуется как null
            payload["gamma"] = float("nan")
        return RelevanceSet.model_validate(payload)

    def write_manifest(self, manifest: RunManifest) -> Path:
        """Манифест с sha256 всех перечисленных артефактов"""
        checksums = {
            name: sha256_file(path)
            for name, path in sorted(manifest.artifacts.items())
            if Path(path).exists()
        }
        payload = manifest.model_dump(mode="json")
        payload["checksums"] = checksums
        path = self.write_json(f"{manifest.command}.manifest", payload)
        logger.info(f"Run manifest written to {path}")
        return path
