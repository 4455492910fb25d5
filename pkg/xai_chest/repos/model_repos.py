"""
Текстовый формат файла модели (версия 1)

    XAICHEST-MLP 1
    layer_dims 104 15 15 15 104
    hidden_activation relu
    output_activation identity
    weight 0 104 15
    <104 строк по 15 чисел>
    bias 0 15
    <1 строка из 15 чисел>
    ...
    end

Матрица слоя хранится как (fan_in × fan_out) построчно. Числа пишутся
в шестнадцатеричной записи float.hex (точное восстановление); при чтении
принимается и десятичная запись.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Union

import numpy as np

from xai_chest.models.nn_models import Activation, Mlp
from xai_chest.utils.errors import ArtifactIOError, ModelFormatError, ModelVersionError

logger = logging.getLogger(__name__)

MAGIC = "XAICHEST-MLP"
FORMAT_VERSION = 1


def dumps_model(model: Mlp) -> str:
    lines = [
        f"{MAGIC} {FORMAT_VERSION}",
        "layer_dims " + " ".join(str(d) for d in model.layer_dims),
        f"hidden_activation {model.hidden_activation.value}",
        f"output_activation {model.output_activation.value}",
    ]
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        lines.append(f"weight {l} {w.shape[0]} {w.shape[1]}")
        lines.extend(" ".join(float(v).hex() for v in row) for row in w)
        lines.append(f"bias {l} {b.size}")
        lines.append(" ".join(float(v).hex() for v in b))
    lines.append("end")
    return "\n".join(lines) + "\n"


def _parse_float(token: str, line_no: int, field: str) -> float:
    try:
        if "x" in token.lower():
            return float.fromhex(token)
        return float(token)
    except ValueError:
        raise ModelFormatError(f"invalid number '{token}'", line=line_no, field=field)


class _Reader:
    def __init__(self, text: str) -> None:
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, field: str) -> tuple[int, list[str]]:
        if self.pos >= len(self.lines):
            raise ModelFormatError("unexpected end of file", line=self.pos + 1, field=field)
        self.pos += 1
        return self.pos, self.lines[self.pos - 1].split()

    def keyword(self, keyword: str, n_args: int) -> tuple[int, list[str]]:
        line_no, tokens = self.next(keyword)
        if not tokens or tokens[0] != keyword:
            got = tokens[0] if tokens else "<empty>"
            raise ModelFormatError(f"expected '{keyword}', got '{got}'", line=line_no, field=keyword)
        if n_args >= 0 and len(tokens) != n_args + 1:
            raise ModelFormatError(
                f"'{keyword}' takes {n_args} values, got {len(tokens) - 1}", line=line_no, field=keyword
            )
        return line_no, tokens[1:]

    def ints(self, tokens: list[str], line_no: int, field: str) -> list[int]:
        try:
            return [int(t) for t in tokens]
        except ValueError:
            raise ModelFormatError(f"expected integers, got {tokens}", line=line_no, field=field)

    def row(self, width: int, field: str) -> np.ndarray:
        line_no, tokens = self.next(field)
        if len(tokens) != width:
            raise ModelFormatError(f"expected {width} values, got {len(tokens)}", line=line_no, field=field)
        return np.array([_parse_float(t, line_no, field) for t in tokens], dtype=np.float64)


def loads_model(text: str) -> Mlp:
    """Разбор текста модели; ошибки сообщают номер строки и поле"""
    reader = _Reader(text)
    line_no, tokens = reader.next("header")
    if len(tokens) != 2 or tokens[0] != MAGIC:
        raise ModelFormatError(f"not a model file (expected '{MAGIC} <version>')", line=line_no, field="header")
    (version,) = reader.ints(tokens[1:], line_no, "version")
    if version != FORMAT_VERSION:
        raise ModelVersionError(found=version, expected=FORMAT_VERSION)

    line_no, tokens = reader.keyword("layer_dims", -1)
    dims = reader.ints(tokens, line_no, "layer_dims")
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ModelFormatError(f"invalid layer_dims {dims}", line=line_no, field="layer_dims")

    activations = {}
    for key in ("hidden_activation", "output_activation"):
        line_no, (value,) = reader.keyword(key, 1)
        try:
            activations[key] = Activation(value)
        except ValueError:
            raise ModelFormatError(f"unknown activation '{value}'", line=line_no, field=key)

    weights, biases = [], []
    for l in range(len(dims) - 1):
        line_no, tokens = reader.keyword("weight", 3)
        index, rows, cols = reader.ints(tokens, line_no, "weight")
        if (index, rows, cols) != (l, dims[l], dims[l + 1]):
            raise ModelFormatError(
                f"weight header ({index}, {rows}, {cols}) != ({l}, {dims[l]}, {dims[l + 1]})",
                line=line_no,
                field="weight",
            )
        weights.append(np.vstack([reader.row(cols, f"weight[{l}]") for _ in range(rows)]))
        line_no, tokens = reader.keyword("bias", 2)
        index, n = reader.ints(tokens, line_no, "bias")
        if (index, n) != (l, dims[l + 1]):
            raise ModelFormatError(f"bias header ({index}, {n}) != ({l}, {dims[l + 1]})", line=line_no, field="bias")
        biases.append(reader.row(n, f"bias[{l}]"))
    reader.keyword("end", 0)

    try:
        return Mlp(
            layer_dims=tuple(dims),
            weights=weights,
            biases=biases,
            hidden_activation=activations["hidden_activation"],
            output_activation=activations["output_activation"],
        )
    except ValueError as e:
        raise ModelFormatError(str(e)) from e


def save_model(model: Mlp, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps_model(model), encoding="utf-8", newline="\n")
    except OSError as e:
        raise ArtifactIOError(f"cannot write model {path}: {e}") from e
    logger.debug(f"Saved model {model.layer_dims} to {path}")
    return path


def load_model(path: Union[str, Path]) -> Mlp:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(f"cannot read model {path}: {e}") from e
    return loads_model(text)
