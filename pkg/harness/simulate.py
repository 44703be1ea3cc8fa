"""
title: Decoding Simulator
id: simulate
description: Monte Carlo driver for the LP, RPC and sum-product decoders. Constraint-count sweeps, iteration and timing statistics, word error rates. Writes CSV.
license: MIT
version: 0.4.0
requirements: numpy, pydantic, loguru, aiofiles, python-dotenv
"""

# Usage: python -m harness.simulate <decode|sweep-dc|sweep-n|sweep-m|wer|timing> [flags]
#
# The all-zero codeword is transmitted on every block. Blocks are decoded in a
# process pool (or inline with WORKERS=0) and written in block order by a single
# writer. Every decoder listed sees the same noise on a given block.
#
# Exit codes: 0 success, 1 invalid experiment, 2 failure while running.

import argparse
import asyncio
import csv
import io
import math
import os
import signal
import sys
import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, NamedTuple, TextIO

import aiofiles
import numpy as np
from dotenv import find_dotenv, load_dotenv
from loguru import logger
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from codes.channel import block_seed, bpsk, llr_awgn, snr_to_sigma, transmit_awgn
from codes.code_model import CodeStructureError, ParityCheckCode, load_alist, random_regular_ldpc
from decoders.adaptive_lp import (
    MAX_STANDARD_DEGREE,
    DecodeOptions,
    DecodeOutcome,
    decode_adaptive,
    decode_standard,
    parity_audit,
)
from decoders.ml_oracle import ml_lower_bound
from decoders.rpc_cutting import (
    RpcBudget,
    clusters_without_cycle,
    decode_with_rpc,
    fractional_subgraph,
)
from decoders.sum_product import BpConfig, sum_product_decode
from solvers.bounded_simplex import format_lp
from utils.decoding_types import (
    BLOCK_RECORD_FIELDS,
    CODEWORD_STATUSES,
    BlockRecord,
    DecoderName,
    DecodeStatus,
    ExperimentKind,
    SummaryRow,
)
from utils.log_setup import LogLevel, add_log_handler

log = logger.bind(lpdec=True)

ENV_PREFIX = "LPDEC_"
WILSON_Z = 1.959963984540054
SUMMARY_FIELDS: tuple[str, ...] = tuple(SummaryRow.__annotations__)
EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class ExperimentSpecError(ValueError):
    def __init__(self, message: str):
        log.error(message)
        super().__init__(message)


# region Experiment description
class ExperimentSpec(BaseModel):
    kind: ExperimentKind = Field(default="decode")
    alist_path: Path | None = Field(default=None, description="Parity-check matrix in alist format.")
    generator: tuple[int, int, int] | None = Field(
        default=None,
        description="""(n, dv, dc) of a random regular code. The sweeps take the fixed
        parameters from here: n for sweep-dc, timing and sweep-m, (dv, dc) for sweep-n.""",
    )
    values: list[int] = Field(
        default_factory=list,
        description="Swept parameter: d_c for sweep-dc and timing, n for sweep-n, m for sweep-m.",
    )
    dv: int | None = Field(
        default=None, ge=2, description="Variable degree for sweep-m and sweep-n, overrides the generator."
    )
    snr_db: list[float] = Field(default_factory=lambda: [-1.0], min_length=1)
    blocks: int = Field(default=1, ge=1)
    decoders: list[DecoderName] = Field(default_factory=lambda: ["adaptive"], min_length=1)
    budget: RpcBudget = Field(default_factory=RpcBudget)
    master_seed: int = Field(default=0, ge=0)
    warm_start: bool = Field(default=True)
    noiseless: bool = Field(default=False, description="Send the BPSK symbols without noise.")
    output: Path | None = Field(default=None, description="CSV destination. None writes to stdout.")

    @field_validator("decoders")
    @classmethod
    def unique_decoders(cls, v: list[DecoderName]) -> list[DecoderName]:
        if len(set(v)) != len(v):
            raise ValueError(f"decoder listed twice: {v}")
        return v

    @model_validator(mode="after")
    def code_source_fits_kind(self) -> "ExperimentSpec":
        if self.kind in ("decode", "wer"):
            if (self.alist_path is None) == (self.generator is None):
                raise ValueError("give exactly one of alist_path and generator")
            return self
        if self.alist_path is not None:
            raise ValueError(f"{self.kind} builds its own codes, alist_path is not accepted")
        if self.generator is None:
            raise ValueError(f"{self.kind} needs generator for its fixed parameters")
        if not self.values:
            raise ValueError(f"{self.kind} needs a nonempty values list")
        if self.kind in ("sweep-dc", "timing") and any(v < 4 or v % 2 for v in self.values):
            raise ValueError("rate-1/2 sweeps need even check degrees >= 4")
        return self

    def code_seed(self, point: int) -> int:
        """Seed of the code at sweep point `point`, separate from the block seeds."""
        return block_seed(self.master_seed, 2**32 + point) % 2**31

    def build_codes(self) -> list[ParityCheckCode]:
        """One code per sweep point. Raises CodeStructureError or OSError for bad sources."""
        if self.alist_path is not None:
            codes = [load_alist(self.alist_path)]
        else:
            n, dv, dc = self.generator
            match self.kind:
                case "decode" | "wer":
                    codes = [random_regular_ldpc(n, dv, dc, self.code_seed(0))]
                case "sweep-dc" | "timing":
                    codes = [
                        random_regular_ldpc(n, v // 2, v, self.code_seed(k))
                        for k, v in enumerate(self.values)
                    ]
                case "sweep-n":
                    codes = [
                        random_regular_ldpc(v, self.dv or dv, dc, self.code_seed(k))
                        for k, v in enumerate(self.values)
                    ]
                case "sweep-m":
                    var_degree = self.dv or dv
                    codes = []
                    for k, m in enumerate(self.values):
                        if (n * var_degree) % m:
                            raise ExperimentSpecError(
                                f"m = {m} does not divide n*dv = {n * var_degree}, no regular code exists"
                            )
                        codes.append(random_regular_ldpc(n, var_degree, n * var_degree // m, self.code_seed(k)))
        if "standard" in self.decoders:
            for code in codes:
                if code.max_check_degree > MAX_STANDARD_DEGREE:
                    raise ExperimentSpecError(
                        f"decoder 'standard' cannot handle check degree {code.max_check_degree} of {code.name}"
                    )
        return codes


class BlockJob(NamedTuple):
    code: ParityCheckCode
    block: int
    seed: int
    snr_db: float
    decoders: tuple[DecoderName, ...]
    budget: RpcBudget
    warm_start: bool
    noiseless: bool
    dump_lp: bool


class BlockResult(NamedTuple):
    records: list[BlockRecord]
    # (file name, LP text) of decodes that hit a limit.
    lp_dumps: list[tuple[str, str]]


def plan_jobs(spec: ExperimentSpec, codes: Sequence[ParityCheckCode], dump_lp: bool) -> list[BlockJob]:
    """Jobs in output order. Block seeds only depend on the position of the block."""
    jobs: list[BlockJob] = []
    offset = 0
    for code in codes:
        for snr in spec.snr_db:
            jobs.extend(
                BlockJob(
                    code=code,
                    block=b,
                    seed=block_seed(spec.master_seed, offset + b),
                    snr_db=snr,
                    decoders=tuple(spec.decoders),
                    budget=spec.budget,
                    warm_start=spec.warm_start,
                    noiseless=spec.noiseless,
                    dump_lp=dump_lp,
                )
                for b in range(spec.blocks)
            )
            offset += spec.blocks
    return jobs


# endregion Experiment description


# region Block decoding (runs in worker processes)
def _audit_failures(code: ParityCheckCode, decoder: DecoderName, outcome: DecodeOutcome) -> int:
    failures = 0 if decoder == "standard" else len(parity_audit(code, outcome))
    if outcome.status is DecodeStatus.PSEUDOCODEWORD and outcome.rpc_cuts_added == 0:
        if trees := clusters_without_cycle(fractional_subgraph(code, outcome.x, outcome.epsilon_int)):
            log.warning(f"{len(trees)} clusters of a fractional optimum have no cycle.")
            failures += 1
    return failures


def decode_block(job: BlockJob) -> BlockResult:
    code = job.code
    codeword = np.zeros(code.n, dtype=np.uint8)
    sigma = snr_to_sigma(job.snr_db)
    noise_rng = np.random.Generator(np.random.PCG64(job.seed))
    received = bpsk(codeword) if job.noiseless else transmit_awgn(codeword, sigma, noise_rng)
    gamma = llr_awgn(received, sigma)
    opts = DecodeOptions(warm_start=job.warm_start)

    records: list[BlockRecord] = []
    dumps: list[tuple[str, str]] = []
    for decoder in job.decoders:
        base = {
            "block": job.block,
            "seed": job.seed,
            "decoder": decoder,
            "snr_db": job.snr_db,
            "code": code.name,
        }
        if decoder == "bp":
            started = time.perf_counter_ns()
            result = sum_product_decode(code, gamma, BpConfig())
            elapsed = time.perf_counter_ns() - started
            status = DecodeStatus.CODEWORD if result.converged else DecodeStatus.NOT_CONVERGED
            records.append(
                BlockRecord(
                    **base,
                    status=str(status),
                    iterations=result.iterations,
                    cuts_added=0,
                    final_parity_constraints=0,
                    rpc_cuts_added=0,
                    lp_pivots=0,
                    elapsed_ns=elapsed,
                    wrong_codeword=bool(result.converged and result.decision.any()),
                    objective=float(gamma @ result.decision),
                    audit_failures=0,
                    rpc_repeated_visits=0,
                )
            )
            continue

        match decoder:
            case "adaptive":
                outcome = decode_adaptive(code, gamma, opts)
            case "standard":
                outcome = decode_standard(code, gamma, opts)
            case "rpc":
                rpc_rng = np.random.default_rng([job.seed, 1])
                outcome = decode_with_rpc(code, gamma, opts, job.budget, rng=rpc_rng)
        records.append(
            BlockRecord(
                **base,
                status=str(outcome.status),
                iterations=outcome.iterations,
                cuts_added=outcome.cuts_added_total,
                final_parity_constraints=outcome.final_parity_constraints,
                rpc_cuts_added=outcome.rpc_cuts_added,
                lp_pivots=outcome.lp_pivots_total,
                elapsed_ns=outcome.elapsed_ns,
                wrong_codeword=bool(outcome.status in CODEWORD_STATUSES and outcome.hard_decision.any()),
                objective=outcome.objective_value,
                audit_failures=_audit_failures(code, decoder, outcome),
                rpc_repeated_visits=outcome.rpc_repeated_visits,
            )
        )
        if job.dump_lp and outcome.status is DecodeStatus.LIMIT_EXCEEDED and outcome.problem is not None:
            name = f"{code.name}-snr{job.snr_db:g}-block{job.block}-{decoder}.lp"
            dumps.append((name, format_lp(outcome.problem, name=name)))
    return BlockResult(records, dumps)


def _init_worker(log_level: LogLevel) -> None:
    logger.remove()
    add_log_handler(log_level, sink=sys.stderr)


# endregion Block decoding


# region Summaries
def wilson_interval(failures: int, blocks: int, z: float = WILSON_Z) -> tuple[float, float]:
    if blocks <= 0:
        raise ValueError("blocks must be positive")
    p = failures / blocks
    denominator = 1 + z**2 / blocks
    centre = (p + z**2 / (2 * blocks)) / denominator
    half = z * math.sqrt(p * (1 - p) / blocks + z**2 / (4 * blocks**2)) / denominator
    return max(0.0, centre - half), min(1.0, centre + half)


def is_failure(record: BlockRecord) -> bool:
    return record["status"] not in CODEWORD_STATUSES or record["wrong_codeword"]


def summarize(records: Sequence[BlockRecord]) -> list[SummaryRow]:
    """One row per (decoder, snr, code), in order of first appearance."""
    if not records:
        raise ValueError("Cannot summarize an empty record list.")
    groups: dict[tuple[str, float, str], list[BlockRecord]] = {}
    for record in records:
        groups.setdefault((record["decoder"], record["snr_db"], record["code"]), []).append(record)

    rows: list[SummaryRow] = []
    for (decoder, snr, code), group in groups.items():
        blocks = len(group)
        failures = sum(is_failure(r) for r in group)
        low, high = wilson_interval(failures, blocks)
        iterations = [r["iterations"] for r in group]
        constraints = [r["final_parity_constraints"] for r in group]
        row = SummaryRow(
            decoder=decoder,
            code=code,
            snr_db=snr,
            blocks=blocks,
            failures=failures,
            wer=failures / blocks,
            wer_low=low,
            wer_high=high,
            iterations_mean=float(np.mean(iterations)),
            iterations_max=max(iterations),
            constraints_mean=float(np.mean(constraints)),
            constraints_max=max(constraints),
            elapsed_ns_mean=float(np.mean([r["elapsed_ns"] for r in group])),
            audit_failures=sum(r.get("audit_failures", 0) for r in group),
            repeated_rpc_visits=sum(r.get("rpc_repeated_visits", 0) for r in group),
        )
        if decoder == "rpc":
            row["ml_lower_bound"] = ml_lower_bound(sum(r["wrong_codeword"] for r in group), blocks)
        rows.append(row)
    return rows


def _csv_line(values: Sequence[Any]) -> str:
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerow(values)
    return buffer.getvalue()


def format_block_record(record: BlockRecord) -> str:
    return _csv_line([record[name] for name in BLOCK_RECORD_FIELDS])


def format_summary(rows: Sequence[SummaryRow]) -> str:
    lines = ["# " + _csv_line(SUMMARY_FIELDS)]
    lines += ["# " + _csv_line([row.get(name, "") for name in SUMMARY_FIELDS]) for row in rows]
    return "".join(lines)


# endregion Summaries


class ExperimentResult(NamedTuple):
    records: list[BlockRecord]
    summary: list[SummaryRow]


class _Sink:
    """Single writer for the CSV stream: a file through aiofiles, or a text stream."""

    def __init__(self, path: Path | None, stream: TextIO | None = None):
        self.path = path
        self.stream = stream or sys.stdout
        self._handle = None

    async def __aenter__(self) -> "_Sink":
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._handle = await aiofiles.open(self.path, "w", newline="")
        return self

    async def __aexit__(self, *exc_info) -> None:
        if self._handle is not None:
            await self._handle.close()
        else:
            self.stream.flush()

    async def write(self, text: str) -> None:
        if self._handle is not None:
            await self._handle.write(text)
        else:
            self.stream.write(text)


class Simulator:
    class Valves(BaseModel):
        LOG_LEVEL: LogLevel = Field(
            default="INFO",
            description="Select logging level. Records go to stderr, the CSV stream stays clean.",
        )
        WORKERS: int = Field(
            default=0,
            ge=0,
            description="""Worker processes for block decoding.
            0 decodes inline in the main process.""",
        )
        DUMP_LP_ON_LIMIT: bool = Field(
            default=False,
            description="Write the LP of every decode that hits a limit next to the CSV output.",
        )

    def __init__(self, valves: dict[str, Any] | None = None):
        self.valves = self.Valves(**(valves if valves else {}))
        self.shutdown_event = asyncio.Event()

    @classmethod
    def from_env(cls, overrides: dict[str, Any] | None = None) -> "Simulator":
        """
        Valves from LPDEC_* variables, then non-None overrides. A .env file in the
        working directory or one of its parents is loaded first.
        """
        load_dotenv(find_dotenv(usecwd=True))
        values: dict[str, Any] = {
            name: os.environ[ENV_PREFIX + name]
            for name in cls.Valves.model_fields
            if ENV_PREFIX + name in os.environ
        }
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls(values)

    async def run_experiment(
        self,
        spec: ExperimentSpec,
        codes: Sequence[ParityCheckCode] | None = None,
        stream: TextIO | None = None,
    ) -> ExperimentResult:
        add_log_handler(self.valves.LOG_LEVEL, sink=sys.stderr)
        codes = codes if codes is not None else spec.build_codes()
        jobs = plan_jobs(spec, codes, self.valves.DUMP_LP_ON_LIMIT)
        log.info(
            f"Running {spec.kind}: {len(jobs)} blocks over {len(codes)} codes, "
            f"decoders {', '.join(spec.decoders)}, {self.valves.WORKERS} workers."
        )

        records: list[BlockRecord] = []
        dump_dir = spec.output.parent if spec.output is not None else Path.cwd()
        async with _Sink(spec.output, stream) as sink:
            await sink.write(_csv_line(BLOCK_RECORD_FIELDS))
            async for result in self._results_in_order(jobs):
                for record in result.records:
                    await sink.write(format_block_record(record))
                records.extend(result.records)
                for name, text in result.lp_dumps:
                    async with aiofiles.open(dump_dir / name, "w") as f:
                        await f.write(text)
                    log.warning(f"Decode hit a limit, LP written to {dump_dir / name}.")
            summary = summarize(records) if records else []
            if summary:
                await sink.write(format_summary(summary))

        for row in summary:
            log.info("Summary.", payload=row)
        if spec.output is not None:
            log.success(f"Wrote {len(records)} records to {spec.output}.")
        return ExperimentResult(records, summary)

    async def _results_in_order(self, jobs: Sequence[BlockJob]):
        if self.valves.WORKERS == 0:
            for job in jobs:
                if self.shutdown_event.is_set():
                    log.warning("Stopping early on shutdown signal.")
                    return
                yield decode_block(job)
                await asyncio.sleep(0)
            return

        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(
            max_workers=self.valves.WORKERS,
            initializer=_init_worker,
            initargs=(self.valves.LOG_LEVEL,),
        ) as executor:
            futures = [loop.run_in_executor(executor, decode_block, job) for job in jobs]
            try:
                for future in futures:
                    if self.shutdown_event.is_set():
                        log.warning("Stopping early on shutdown signal.")
                        return
                    yield await future
            finally:
                for future in futures:
                    future.cancel()


# region Command line
class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors count as an invalid experiment."""

    def error(self, message: str):
        raise ExperimentSpecError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ExperimentSpecError(f"expected a comma-separated list of integers, got '{text}'")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ExperimentSpecError(f"expected a comma-separated list of numbers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument("--code", type=Path, help="alist file")
    source.add_argument("--gen", help="n,dv,dc of a random regular code")
    common.add_argument("--snr", default="-1.0", help="comma-separated SNR values in dB")
    common.add_argument("--blocks", type=int, default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--decoder", default=None, help="comma-separated: adaptive, standard, rpc, bp")
    common.add_argument("--cmax", type=int, default=None)
    common.add_argument("--lp-resolve-cap", type=int, default=None)
    common.add_argument("--tmax-ms", type=float, default=None)
    warm = common.add_mutually_exclusive_group()
    warm.add_argument("--warm", dest="warm_start", action="store_true", default=True)
    warm.add_argument("--cold", dest="warm_start", action="store_false")
    common.add_argument("--batch-cuts", action="store_true")
    common.add_argument("--out", type=Path, default=None)
    common.add_argument("--values", default=None, help="comma-separated swept parameter values")
    common.add_argument("--dv", type=int, default=None)
    common.add_argument("--noiseless", action="store_true")
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("--log-level", default=None)

    parser = _ArgumentParser(prog="harness.simulate", description="LP decoding experiments.")
    subparsers = parser.add_subparsers(dest="kind", required=True, parser_class=_ArgumentParser)
    for kind in ("decode", "sweep-dc", "sweep-n", "sweep-m", "wer", "timing"):
        subparsers.add_parser(kind, parents=[common])
    return parser


def build_spec(args: argparse.Namespace) -> ExperimentSpec:
    """Raises ExperimentSpecError or pydantic.ValidationError."""
    budget: dict[str, Any] = {
        "c_max": args.cmax,
        "lp_resolve_cap": args.lp_resolve_cap,
        "t_max_ms": args.tmax_ms,
        "batch_cuts": args.batch_cuts,
    }
    default_decoders = {"timing": "adaptive,standard", "wer": "adaptive,rpc"}
    fields: dict[str, Any] = {
        "kind": args.kind,
        "alist_path": args.code,
        "generator": tuple(_int_list(args.gen)) if args.gen else None,
        "values": _int_list(args.values) if args.values else [],
        "dv": args.dv,
        "snr_db": _float_list(args.snr),
        "blocks": args.blocks,
        "decoders": [
            d.strip()
            for d in (args.decoder or default_decoders.get(args.kind, "adaptive")).split(",")
            if d.strip()
        ],
        "budget": RpcBudget(**{k: v for k, v in budget.items() if v is not None}),
        "master_seed": args.seed,
        "warm_start": args.warm_start,
        "noiseless": args.noiseless,
        "output": args.out,
    }
    return ExperimentSpec(**{k: v for k, v in fields.items() if v is not None})


def _validation_message(e: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(p) for p in error['loc']) or 'spec'}: {error['msg']}" for error in e.errors()
    )


async def _run(simulator: Simulator, spec: ExperimentSpec, codes: list[ParityCheckCode]) -> None:
    loop = asyncio.get_running_loop()

    def signal_handler(signum: int) -> None:
        log.warning(f"Received signal {signum}. Shutting down...")
        simulator.shutdown_event.set()

    for sig in (signal.SIGINT, signal.SIGTERM):
        loop.add_signal_handler(sig, signal_handler, sig)
    await simulator.run_experiment(spec, codes)


def main(argv: Sequence[str] | None = None) -> int:
    logger.remove()
    try:
        args = build_parser().parse_args(argv)
        simulator = Simulator.from_env({"LOG_LEVEL": args.log_level, "WORKERS": args.workers})
        add_log_handler(simulator.valves.LOG_LEVEL, sink=sys.stderr)
        spec = build_spec(args)
        codes = spec.build_codes()
    except ValidationError as e:
        log.error(f"Invalid experiment: {_validation_message(e)}")
        return EXIT_INVALID
    except (ExperimentSpecError, CodeStructureError, OSError) as e:
        log.error(f"Invalid experiment: {e}")
        return EXIT_INVALID

    try:
        asyncio.run(_run(simulator, spec, codes))
    except Exception:
        log.exception("Experiment failed:")
        return EXIT_RUNTIME
    if simulator.shutdown_event.is_set():
        return EXIT_RUNTIME
    return EXIT_OK


# endregion Command line


if __name__ == "__main__":
    sys.exit(main())
