"""
title: AWGN Channel
id: channel
description: BPSK over AWGN. SNR to noise deviation, noisy transmission and the LLR cost vector.
license: MIT
version: 0.2.0
requirements: numpy, pydantic
"""

# Randomness comes from numpy's PCG64 bit generator, normals from its ziggurat
# sampler (Generator.standard_normal). Both are stable across numpy releases
# for a fixed seed.

import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field, computed_field


class ChannelConfig(BaseModel):
    snr_db: float = Field(
        default=0.0,
        description="""Ratio of transmitted signal variance to noise variance, in dB.
        BPSK symbols are +-1, so the signal variance is 1.""",
    )
    kind: Literal["AWGN"] = Field(default="AWGN")

    @computed_field
    @property
    def sigma(self) -> float:
        return snr_to_sigma(self.snr_db)


def snr_to_sigma(snr_db: float) -> float:
    return math.sqrt(10 ** (-snr_db / 10))


def bpsk(codeword: np.ndarray) -> np.ndarray:
    """0 -> +1, 1 -> -1."""
    return 1.0 - 2.0 * np.asarray(codeword, dtype=np.float64)


def transmit_awgn(codeword: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    symbols = bpsk(codeword)
    return symbols + sigma * rng.standard_normal(symbols.shape[0])


def llr_awgn(received: np.ndarray, sigma: float) -> np.ndarray:
    """gamma_i = log(P(r_i | 0) / P(r_i | 1)) = 2 r_i / sigma^2."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    gamma = 2.0 * np.asarray(received, dtype=np.float64) / sigma**2
    if not np.all(np.isfinite(gamma)):
        raise ValueError("LLR vector has non-finite entries.")
    return gamma


def block_seed(master_seed: int, block_index: int) -> int:
    """Per-block seed, independent of how blocks are spread over workers."""
    state = np.random.SeedSequence((master_seed, block_index)).generate_state(1, dtype=np.uint64)
    return int(state[0])


def block_rng(master_seed: int, block_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(block_seed(master_seed, block_index)))
