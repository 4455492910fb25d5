"""
Интерпретируемость U-модели через обучаемый шум

N-модель (та же архитектура, выход sigmoid) выдаёт веса шума b′ для каждого
входа U. Вход зашумляется x″ = x + b′⊙ε и подаётся в замороженную U;
потеря L_N = L_U − λ·L_X поощряет максимальный шум там, где он не вредит
оценке канала. Поднесущие с малым весом считаются релевантными.

Здесь же подбор порога γ с переобучением U и зонд невыпуклости L_U
вдоль случайной прямой в пространстве параметров.
"""

from __future__ import annotations

import logging
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from xai_chest.models.eval_models import LinkResult
from xai_chest.models.nn_models import Activation, Dataset, Mlp, ParamGrads, TrainConfig, TrainHistory
from xai_chest.models.phy_models import FrameSpec
from xai_chest.models.xai_models import (
    MASK_CEIL,
    MASK_FLOOR,
    AggregatedMask,
    ConvexityViolation,
    NoiseMask,
    ProbeResult,
    RelevanceSet,
    SweepRecord,
    SweepResult,
)
from xai_chest.services.neural_service import (
    backward,
    evaluate_mse,
    fit_minibatch,
    forward,
    init_mlp,
    mse_loss,
    predict,
    train_u,
)
from xai_chest.utils.errors import DegenerateInputError, SizeError
from xai_chest.utils.parallel import run_ordered
from xai_chest.utils.seeding import SeedStream, derive_seed, make_rng

logger = logging.getLogger(__name__)

CONVEXITY_TOLERANCE = 1e-9

# evaluate(model, relevance) -> LinkResult на SNR подбора
Evaluator = Callable[[Mlp, Optional[RelevanceSet]], LinkResult]


class NObjective(NamedTuple):
    loss: float
    l_u: float
    l_x: float
    grads: ParamGrads
    mask: np.ndarray


def clip_mask(raw: np.ndarray) -> np.ndarray:
    return np.clip(raw, MASK_FLOOR, MASK_CEIL)


def interpretability_loss(mask: np.ndarray) -> float:
    """L_X = среднее log(b′); не больше нуля, ноль только при b′ ≡ 1"""
    values = mask.values if isinstance(mask, NoiseMask) else np.asarray(mask, dtype=np.float64)
    return float(np.mean(np.log(np.maximum(values, MASK_FLOOR))))


def n_model_objective(
    n_model: Mlp,
    u_model: Mlp,
    x: np.ndarray,
    targets: np.ndarray,
    eps: np.ndarray,
    lam: float,
) -> NObjective:
    """
    L_N = L_U − λ·L_X и градиенты по параметрам N при фиксированном ε

    Градиент по b′ проходит через замороженную U по пути градиента входа:
    ∂L/∂b′ = (∂L_U/∂x″)⊙ε − λ/(B·d·b′). На обрезанных элементах маски он нулевой.
    """
    x = np.asarray(x, dtype=np.float64)
    raw, cache_n = forward(n_model, x)
    mask = clip_mask(raw)
    clipped = (raw < MASK_FLOOR) | (raw > MASK_CEIL)

    noisy = x + mask * eps
    y, cache_u = forward(u_model, noisy)
    l_u, grad_y = mse_loss(y, targets)
    _, grad_noisy = backward(u_model, cache_u, grad_y)

    l_x = interpretability_loss(mask)
    grad_mask = grad_noisy * eps - lam / (mask.size * mask)
    grad_mask = np.where(clipped, 0.0, grad_mask)
    grads, _ = backward(n_model, cache_n, grad_mask)
    return NObjective(loss=l_u - lam * l_x, l_u=l_u, l_x=l_x, grads=grads, mask=mask)


def n_model_architecture(u_model: Mlp) -> tuple[int, ...]:
    """Скрытые слои как у U, выход - по маске на каждый вход U"""
    return (u_model.input_dim, *u_model.layer_dims[1:-1], u_model.input_dim)


def train_n_model(
    u_model: Mlp,
    dataset: Dataset,
    config: TrainConfig,
    progress: bool = False,
) -> tuple[Mlp, TrainHistory]:
    """
    Обучение N-модели при замороженной U

    ε ~ N(0, 1) берётся свежим для каждого элемента батча из потока EPSILON
    со счётчиками (эпоха, батч).
    """
    if u_model.input_dim != dataset.d_in or u_model.output_dim != dataset.d_out:
        raise SizeError(
            f"U model {u_model.layer_dims} does not fit dataset ({dataset.d_in} -> {dataset.d_out})"
        )
    if len(dataset) == 0:
        raise DegenerateInputError("cannot train on an empty dataset")
    n_model = init_mlp(
        n_model_architecture(u_model),
        derive_seed(config.seed, SeedStream.INIT, 1),
        output_activation=Activation.SIGMOID,
    )

    def objective(model: Mlp, x: np.ndarray, t: np.ndarray, epoch: int, batch_index: int):
        eps = make_rng(config.seed, SeedStream.EPSILON, epoch, batch_index).standard_normal(x.shape)
        out = n_model_objective(model, u_model, x, t, eps, config.lam)
        return out.loss, out.grads

    n_model, history = fit_minibatch(n_model, dataset, config, objective, desc="N model", progress=progress)
    if history.losses:
        logger.info(
            f"N model {n_model.layer_dims}: {len(history.losses)} epochs, "
            f"final L_N {history.losses[-1]:.4e}, lambda={config.lam}"
        )
    return n_model, history


def aggregate_masks(masks: np.ndarray, k_on: int) -> np.ndarray:
    """b[k] = (b′[k] + b′[k + k_on]) / 2 по последней оси"""
    masks = np.asarray(masks, dtype=np.float64)
    if masks.shape[-1] != 2 * k_on:
        raise SizeError(f"mask width {masks.shape[-1]} != 2*k_on ({2 * k_on})")
    return 0.5 * (masks[..., :k_on] + masks[..., k_on:])


def aggregate_mask(mask: NoiseMask, spec: FrameSpec) -> AggregatedMask:
    return AggregatedMask(values=aggregate_masks(mask.values, spec.k_on))


def compute_masks(n_model: Mlp, dataset: Dataset, k_on: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Маски для всех строк датасета

    Returns:
        (b′ [n × 2k_on], b [n × k_on])
    """
    masks = clip_mask(predict(n_model, dataset.inputs.astype(np.float64)))
    return masks, aggregate_masks(masks, k_on)


def mean_aggregated_mask(n_model: Mlp, dataset: Dataset, k_on: int) -> AggregatedMask:
    """Средний по датасету вес шума поднесущих; по нему строится Ψ"""
    _, aggregated = compute_masks(n_model, dataset, k_on)
    return AggregatedMask(values=aggregated.mean(axis=0))


def classify_subcarriers(b: AggregatedMask, gamma: float) -> RelevanceSet:
    """Ψ = {k : b[k] < γ}; при b[k] = γ поднесущая нерелевантна"""
    values = b.values
    relevant = np.flatnonzero(values < gamma)
    irrelevant = np.flatnonzero(values >= gamma)
    return RelevanceSet(
        gamma=float(gamma),
        k_on=int(values.size),
        relevant=tuple(int(k) for k in relevant),
        irrelevant=tuple(int(k) for k in irrelevant),
    )


def filter_dataset(dataset: Dataset, rel: RelevanceSet) -> Dataset:
    """Оставляет во входе только Re/Im части поднесущих Ψ; цели не меняются"""
    if dataset.d_in != 2 * rel.k_on:
        raise SizeError(f"dataset input width {dataset.d_in} != 2*k_on ({2 * rel.k_on})")
    if rel.size == 0:
        raise DegenerateInputError(f"relevance set at gamma={rel.gamma} is empty")
    meta = dict(dataset.meta)
    meta["relevant"] = list(rel.relevant)
    meta["gamma"] = rel.gamma
    return Dataset(inputs=dataset.inputs[:, rel.input_columns()], targets=dataset.targets, meta=meta)


class SweepItem(NamedTuple):
    gamma: float
    polarity: str
    relevance: RelevanceSet
    hidden_layers: tuple[int, ...]
    train: Dataset
    config: TrainConfig
    evaluate: Evaluator


class SweepOutcome(NamedTuple):
    result: SweepResult
    models: dict[tuple[float, str], Mlp]


def _run_sweep_item(item: SweepItem) -> tuple[Mlp, LinkResult]:
    data = filter_dataset(item.train, item.relevance)
    arch = (data.d_in, *item.hidden_layers, data.d_out)
    model, _ = train_u(data, arch, item.config)
    return model, item.evaluate(model, item.relevance)


def select_threshold(records: list[SweepRecord], ber_full: float) -> tuple[Optional[float], bool]:
    """
    γ* = argmin BER_relevant при BER_relevant ≤ BER_full

    При равенстве BER выбирается меньший |Ψ|. Returns: (γ* или None, no_improvement)
    """
    feasible = [
        r for r in records
        if r.gamma is not None and np.isfinite(r.ber_relevant) and r.ber_relevant <= ber_full
    ]
    if not feasible:
        return None, True
    best = min(feasible, key=lambda r: (r.ber_relevant, r.n_relevant, r.gamma))
    return best.gamma, False


def threshold_sweep(
    hidden_layers: Sequence[int],
    train: Dataset,
    mask: AggregatedMask,
    gammas: Sequence[float],
    config: TrainConfig,
    evaluate: Evaluator,
    baseline_model: Optional[Mlp] = None,
    workers: int = 1,
    progress: bool = False,
) -> SweepOutcome:
    """
    Подбор порога γ

    Для каждого γ строятся Ψ и его дополнение, на каждом U обучается заново
    с тем же config, затем оценивается BER на SNR подбора. Первая строка -
    базовая модель на всех поднесущих.

    Args:
        hidden_layers: скрытые слои U
        train: полный обучающий датасет (вход 2·k_on)
        mask: средний агрегированный вес шума
        gammas: сетка порогов
        config: параметры обучения U
        evaluate: оценка BER модели с заданным Ψ (должна сериализоваться для workers > 1)
        baseline_model: уже обученная U на всех входах; иначе обучается здесь
        workers: число процессов
    """
    if not len(gammas):
        raise ValueError("threshold grid is empty")
    hidden = tuple(int(h) for h in hidden_layers)
    k_on = len(mask)
    full = RelevanceSet.full(k_on)
    if baseline_model is None:
        baseline_model, _ = train_u(train, (train.d_in, *hidden, train.d_out), config)
    base = evaluate(baseline_model, None)
    ber_full = base.ber
    logger.info(f"Threshold sweep: baseline BER {ber_full:.4e} on {k_on} subcarriers")

    items: list[SweepItem] = []
    for gamma in gammas:
        rel = classify_subcarriers(mask, gamma)
        for polarity, subset in (("relevant", rel), ("irrelevant", rel.complement())):
            if subset.size:
                items.append(SweepItem(float(gamma), polarity, subset, hidden, train, config, evaluate))
    outcomes = run_ordered(_run_sweep_item, items, workers=workers, desc="sweep", progress=progress)
    by_key = {(it.gamma, it.polarity): out for it, out in zip(items, outcomes)}

    records = [
        SweepRecord(
            gamma=None,
            n_relevant=full.size,
            ber_relevant=ber_full,
            ber_irrelevant=None,
            ber_full=ber_full,
            mse=base.mse_channel,
        )
    ]
    for gamma in gammas:
        gamma = float(gamma)
        rel = by_key.get((gamma, "relevant"))
        irr = by_key.get((gamma, "irrelevant"))
        n_rel = classify_subcarriers(mask, gamma).size
        records.append(
            SweepRecord(
                gamma=gamma,
                n_relevant=n_rel,
                ber_relevant=rel[1].ber if rel else float("nan"),
                ber_irrelevant=irr[1].ber if irr else None,
                ber_full=ber_full,
                mse=rel[1].mse_channel if rel else float("nan"),
            )
        )
        logger.info(
            f"gamma={gamma:.2f}: |Psi|={n_rel}, BER_rel={records[-1].ber_relevant:.4e}, "
            f"BER_irr={records[-1].ber_irrelevant}"
        )

    selected, no_improvement = select_threshold(records, ber_full)
    if no_improvement:
        logger.warning("No threshold keeps BER at or below the full-input baseline")
        records[0] = records[0].model_copy(update={"selected": True})
    else:
        records = [
            r.model_copy(update={"selected": True}) if r.gamma == selected else r for r in records
        ]
    result = SweepResult(
        records=records,
        ber_full=ber_full,
        selected_gamma=selected,
        no_improvement=no_improvement,
    )
    models = {key: out[0] for key, out in by_key.items()}
    return SweepOutcome(result=result, models=models)


def random_direction(num_parameters: int, seed: int) -> np.ndarray:
    """Случайный единичный вектор в пространстве параметров"""
    v = np.random.default_rng(seed).standard_normal(num_parameters)
    return v / np.linalg.norm(v)


def restricted_loss(
    u_model: Mlp,
    dataset: Dataset,
    direction: np.ndarray,
    t: float,
    max_rows: Optional[int] = None,
) -> float:
    """g(t) = L_U(θ_U + t·v)"""
    theta = u_model.flat_parameters()
    return evaluate_mse(u_model.from_flat(theta + t * direction), dataset, max_rows)


def find_convexity_violation(
    t: Sequence[float],
    g: Sequence[float],
    rel_tol: float = CONVEXITY_TOLERANCE,
) -> Optional[ConvexityViolation]:
    """
    Поиск тройки (a, m, b) из сетки, m = (a + b)/2, с
    g(m) > (g(a) + g(b))/2 + rel_tol·(max g − min g)

    Возвращает тройку с наибольшим превышением или None.
    """
    t = np.asarray(t, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if t.size < 3:
        return None
    order = np.argsort(t)
    t, g = t[order], g[order]
    tol = rel_tol * float(g.max() - g.min())
    span = float(t[-1] - t[0]) or 1.0
    best: Optional[ConvexityViolation] = None
    for i in range(t.size - 2):
        mids = 0.5 * (t[i] + t[i + 2:])
        k = np.clip(np.searchsorted(t, mids), 0, t.size - 1)
        on_grid = np.abs(t[k] - mids) <= 1e-9 * span
        excess = g[k] - 0.5 * (g[i] + g[i + 2:]) - tol
        hits = np.flatnonzero(on_grid & (excess > 0))
        if hits.size:
            h = hits[np.argmax(excess[hits])]
            j = i + 2 + h
            if best is None or excess[h] > best.excess:
                best = ConvexityViolation(
                    a=float(t[i]), m=float(t[k[h]]), b=float(t[j]),
                    g_a=float(g[i]), g_m=float(g[k[h]]), g_b=float(g[j]),
                    excess=float(excess[h]),
                )
    return best


def loss_landscape_probe(
    u_model: Mlp,
    dataset: Dataset,
    direction_seed: int,
    t_grid: Sequence[float],
    max_rows: Optional[int] = None,
) -> ProbeResult:
    """Значения g(t) на сетке и сертификат невыпуклости, если он найден"""
    if not len(t_grid):
        raise ValueError("t_grid is empty")
    direction = random_direction(u_model.num_parameters, direction_seed)
    values = [restricted_loss(u_model, dataset, direction, float(t), max_rows) for t in t_grid]
    violation = find_convexity_violation(t_grid, values)
    if violation is None:
        logger.info(f"Probe direction {direction_seed}: no midpoint-convexity violation on the grid")
    else:
        logger.info(
            f"Probe direction {direction_seed}: violation at t=({violation.a:.3f}, {violation.m:.3f}, "
            f"{violation.b:.3f}), excess {violation.excess:.3e}"
        )
    return ProbeResult(
        t=[float(t) for t in t_grid],
        g=[float(v) for v in values],
        direction_seed=int(direction_seed),
        tolerance=CONVEXITY_TOLERANCE,
        violation=violation,
    )
