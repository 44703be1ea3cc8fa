import numpy as np
import pytest

from codes.code_model import ParityCheckCode, random_regular_ldpc
from decoders.adaptive_lp import DecodeOutcome
from decoders.ml_oracle import (
    is_ml_certificate_consistent,
    ml_decode_bruteforce,
    ml_lower_bound,
)
from utils.decoding_types import DecodeStatus

REPETITION_3 = ParityCheckCode(n=3, rows=((0, 1), (1, 2)))


def integral_outcome(x) -> DecodeOutcome:
    return DecodeOutcome(
        x=np.asarray(x, dtype=np.float64),
        integral=True,
        status=DecodeStatus.ML_CODEWORD,
        iterations=1,
        cuts_added_total=0,
        final_parity_constraints=0,
        lp_pivots_total=0,
        elapsed_ns=0,
    )


def test_positive_llrs_decode_to_zero():
    code = random_regular_ldpc(16, 3, 4, seed=1)
    result = ml_decode_bruteforce(code, np.linspace(0.1, 2.0, code.n))
    assert result.codeword.tolist() == [0] * code.n
    assert result.cost == 0.0
    assert result.unique


def test_repetition_code():
    result = ml_decode_bruteforce(REPETITION_3, np.array([-1.0, -1.0, 0.5]))
    assert result.codeword.tolist() == [1, 1, 1]
    assert result.cost == pytest.approx(-1.5)


def test_ties_go_to_smallest_codeword():
    result = ml_decode_bruteforce(REPETITION_3, np.zeros(3))
    assert result.codeword.tolist() == [0, 0, 0]
    assert not result.unique
    code = ParityCheckCode(n=4, rows=((0, 1, 2, 3),))
    result = ml_decode_bruteforce(code, np.array([-0.5, -0.5, -0.5, -0.5]))
    assert result.cost == pytest.approx(-2.0)
    result = ml_decode_bruteforce(code, np.array([-1.0, 0.0, 0.0, 0.0]))
    assert result.codeword.tolist() == [1, 0, 0, 1]
    assert not result.unique


def test_rejects_wrong_length():
    with pytest.raises(ValueError):
        ml_decode_bruteforce(REPETITION_3, np.zeros(4))


@pytest.mark.parametrize("wrong,blocks,bound", [(0, 10, 0.0), (3, 1000, 0.003), (5, 5, 1.0)])
def test_lower_bound(wrong, blocks, bound):
    assert ml_lower_bound(wrong, blocks) == pytest.approx(bound)


@pytest.mark.parametrize("wrong,blocks", [(1, 0), (-1, 10), (11, 10)])
def test_lower_bound_rejects_bad_counts(wrong, blocks):
    with pytest.raises(ValueError):
        ml_lower_bound(wrong, blocks)


def test_certificate_consistency():
    gamma = np.array([-1.0, -1.0, 0.5])
    assert is_ml_certificate_consistent(REPETITION_3, gamma, integral_outcome([1, 1, 1]))
    assert not is_ml_certificate_consistent(REPETITION_3, gamma, integral_outcome([0, 0, 0]))
    fractional = integral_outcome([0.5, 0.5, 0.5])
    fractional.integral = False
    assert is_ml_certificate_consistent(REPETITION_3, gamma, fractional)
