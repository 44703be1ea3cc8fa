from enum import StrEnum
from typing import Literal, NotRequired, TypedDict


# region decode status
class DecodeStatus(StrEnum):
    ML_CODEWORD = "MlCodeword"
    PSEUDOCODEWORD = "Pseudocodeword"
    LIMIT_EXCEEDED = "LimitExceeded"
    # Sum-product has no ML certificate, so it gets its own pair.
    CODEWORD = "Codeword"
    NOT_CONVERGED = "NotConverged"


# Statuses whose decision is a valid codeword.
CODEWORD_STATUSES = frozenset({DecodeStatus.ML_CODEWORD, DecodeStatus.CODEWORD})
# endregion decode status


# region experiment rows
DecoderName = Literal["adaptive", "standard", "rpc", "bp"]
ExperimentKind = Literal["decode", "sweep-dc", "sweep-n", "sweep-m", "wer", "timing"]


class BlockRecord(TypedDict):
    block: int
    seed: int
    decoder: DecoderName
    snr_db: float
    status: str
    iterations: int
    cuts_added: int
    final_parity_constraints: int
    rpc_cuts_added: int
    lp_pivots: int
    elapsed_ns: int
    wrong_codeword: bool
    code: str
    objective: float
    # Not written to CSV, only used for summaries.
    audit_failures: NotRequired[int]
    rpc_repeated_visits: NotRequired[int]


# Declared CSV column order.
BLOCK_RECORD_FIELDS: tuple[str, ...] = (
    "block",
    "seed",
    "decoder",
    "snr_db",
    "status",
    "iterations",
    "cuts_added",
    "final_parity_constraints",
    "rpc_cuts_added",
    "lp_pivots",
    "elapsed_ns",
    "wrong_codeword",
    "code",
    "objective",
)


class SummaryRow(TypedDict):
    decoder: DecoderName
    code: str
    snr_db: float
    blocks: int
    failures: int
    wer: float
    wer_low: float
    wer_high: float
    iterations_mean: float
    iterations_max: int
    constraints_mean: float
    constraints_max: int
    elapsed_ns_mean: float
    audit_failures: int
    repeated_rpc_visits: int
    ml_lower_bound: NotRequired[float]


# endregion experiment rows
