"""
title: ML Oracle
id: ml_oracle
description: Exhaustive maximum-likelihood decoding of short codes and the ML word error lower bound from certified wrong decisions.
license: MIT
version: 0.2.0
requirements: numpy, loguru
"""

from typing import NamedTuple

import numpy as np
from loguru import logger

from codes.code_model import ParityCheckCode, enumerate_codewords
from decoders.adaptive_lp import DecodeOutcome

log = logger.bind(lpdec=True)

TIE_TOLERANCE = 1e-12


class MlResult(NamedTuple):
    codeword: np.ndarray
    cost: float
    unique: bool


def ml_decode_bruteforce(code: ParityCheckCode, gamma: np.ndarray) -> MlResult:
    """argmin gamma'c over all codewords. Ties go to the lexicographically smallest codeword."""
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape != (code.n,):
        raise ValueError(f"LLR vector has shape {gamma.shape}, code length is {code.n}.")
    codewords = enumerate_codewords(code)
    costs = codewords @ gamma
    best = float(costs.min())
    tied = codewords[costs <= best + TIE_TOLERANCE]
    # Rows compared as strings of bits, first bit most significant.
    winner = tied[np.lexsort(tied.T[::-1])[0]]
    return MlResult(codeword=winner.copy(), cost=float(winner @ gamma), unique=tied.shape[0] == 1)


def ml_lower_bound(wrong_codeword_count: int, blocks: int) -> float:
    """
    Share of blocks on which a certified decoder returned a codeword other than
    the transmitted one. An ML decoder errs on each of them too, so this bounds
    the ML word error rate from below.
    """
    if blocks <= 0:
        raise ValueError(f"blocks must be positive, got {blocks}")
    if not 0 <= wrong_codeword_count <= blocks:
        raise ValueError(f"wrong codeword count {wrong_codeword_count} not in [0, {blocks}]")
    return wrong_codeword_count / blocks


def is_ml_certificate_consistent(
    code: ParityCheckCode, gamma: np.ndarray, outcome: DecodeOutcome, tolerance: float = 1e-9
) -> bool:
    """An integral LP output must cost exactly as much as the ML codeword."""
    if not outcome.integral:
        return True
    ml = ml_decode_bruteforce(code, gamma)
    consistent = abs(float(np.asarray(gamma) @ outcome.x) - ml.cost) <= tolerance
    if not consistent:
        log.warning(
            "Integral LP output is not ML.",
            payload={"lp_cost": outcome.objective_value, "ml_cost": ml.cost},
        )
    return consistent
