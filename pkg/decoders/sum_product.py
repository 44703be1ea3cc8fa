"""
title: Sum-Product Decoder
id: sum_product
description: Flooding-schedule belief propagation in the LLR domain, used as a comparison baseline.
license: MIT
version: 0.2.0
requirements: numpy, pydantic
"""

from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, Field

from codes.code_model import ParityCheckCode

# Messages are kept in [-L_MAX, L_MAX].
L_MAX = 30.0
_TANH_LIMIT = np.tanh(L_MAX / 2)


class BpConfig(BaseModel):
    max_iterations: int = Field(default=100, ge=1, description="Flooding iterations before giving up.")


class BpResult(NamedTuple):
    decision: np.ndarray
    converged: bool
    iterations: int


class _EdgeLayout(NamedTuple):
    var_of_edge: np.ndarray
    check_of_edge: np.ndarray
    # Check degree -> (checks of that degree x degree) matrix of edge ids.
    groups: dict[int, np.ndarray]


def _layout(code: ParityCheckCode) -> _EdgeLayout:
    var_of_edge = np.fromiter((i for row in code.rows for i in row), dtype=np.int64)
    check_of_edge = np.repeat(np.arange(code.m), code.check_degrees)
    offsets = np.concatenate([[0], np.cumsum(code.check_degrees)])
    by_degree: dict[int, list[np.ndarray]] = {}
    for j, d in enumerate(code.check_degrees):
        by_degree.setdefault(d, []).append(np.arange(offsets[j], offsets[j] + d))
    groups = {d: np.vstack(rows) for d, rows in by_degree.items()}
    return _EdgeLayout(var_of_edge, check_of_edge, groups)


def _check_update(v2c: np.ndarray, groups: dict[int, np.ndarray]) -> np.ndarray:
    """tanh rule, each edge excluding itself via prefix and suffix products."""
    c2v = np.empty_like(v2c)
    for d, edges in groups.items():
        t = np.tanh(v2c[edges] / 2)
        prefix = np.ones((edges.shape[0], d + 1))
        prefix[:, 1:] = np.cumprod(t, axis=1)
        suffix = np.ones((edges.shape[0], d + 1))
        suffix[:, :-1] = np.cumprod(t[:, ::-1], axis=1)[:, ::-1]
        extrinsic = np.clip(prefix[:, :-1] * suffix[:, 1:], -_TANH_LIMIT, _TANH_LIMIT)
        c2v[edges] = 2 * np.arctanh(extrinsic)
    return c2v


def sum_product_decode(
    code: ParityCheckCode, gamma: np.ndarray, cfg: BpConfig | None = None
) -> BpResult:
    cfg = cfg or BpConfig()
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape != (code.n,):
        raise ValueError(f"LLR vector has shape {gamma.shape}, code length is {code.n}.")
    layout = _layout(code)

    v2c = np.clip(gamma[layout.var_of_edge], -L_MAX, L_MAX)
    decision = (gamma < 0).astype(np.uint8)
    for iteration in range(1, cfg.max_iterations + 1):
        c2v = np.clip(_check_update(v2c, layout.groups), -L_MAX, L_MAX)
        total = gamma + np.bincount(layout.var_of_edge, weights=c2v, minlength=code.n)
        decision = (total < 0).astype(np.uint8)
        parity = np.bincount(
            layout.check_of_edge, weights=decision[layout.var_of_edge], minlength=code.m
        )
        if not np.any(parity.astype(np.int64) & 1):
            return BpResult(decision, True, iteration)
        v2c = np.clip(total[layout.var_of_edge] - c2v, -L_MAX, L_MAX)
    return BpResult(decision, False, cfg.max_iterations)
