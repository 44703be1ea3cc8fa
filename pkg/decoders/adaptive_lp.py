"""
title: Adaptive LP Decoder
id: adaptive_lp
description: LP decoding of binary linear codes by cutting planes. Starts from the hard decision and adds violated parity inequalities until none is left. Also provides the non-adaptive decoder with every inequality up front.
license: MIT
version: 0.5.0
requirements: numpy, pydantic, loguru
"""

# Outcome classification:
#   MlCodeword      x is integral and its rounding satisfies every check. The LP
#                   optimum is then the maximum-likelihood codeword.
#   Pseudocodeword  no inequality of any check is violated but x is fractional.
#   LimitExceeded   iteration cap reached with cuts left, or the LP did not reach
#                   an optimum within its pivot budget.

import time
from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from codes.code_model import CheckRow, ParityCheckCode
from solvers.bounded_simplex import (
    LinearConstraint,
    LpProblem,
    LpSolution,
    LpStatus,
    SolverTolerances,
    resolve_with_new_constraints,
    solve,
)
from solvers.cut_search import (
    EPSILON_CUT,
    Cut,
    CutSearchDiagnostics,
    ParityProvenance,
    all_parity_constraints,
    find_all_cuts,
    find_cut_for_check,
)
from utils.decoding_types import DecodeStatus

log = logger.bind(lpdec=True)

# 2^13 inequalities per check.
MAX_STANDARD_DEGREE = 14


class DegreeGuardError(ValueError):
    def __init__(self, degree: int):
        message = (
            f"Check degree {degree} exceeds {MAX_STANDARD_DEGREE}, "
            f"the full inequality set would have 2^{degree - 1} rows per check."
        )
        log.error(message)
        super().__init__(message)


class DecodeOptions(BaseModel):
    max_iterations: int | None = Field(
        default=None, ge=1, description="LP solves before giving up. None means the code length."
    )
    warm_start: bool = Field(default=True, description="Reuse the previous basis after adding cuts.")
    epsilon_int: float = Field(
        default=1e-6, gt=0, lt=0.5, description="Distance to {0, 1} still counted as integral."
    )
    epsilon_cut: float = Field(default=EPSILON_CUT, gt=0, description="Minimum violation of a cut.")
    max_cuts_per_iteration: int | None = Field(
        default=None, ge=1, description="Add at most this many cuts per iteration. None adds all."
    )
    tolerances: SolverTolerances = Field(default_factory=SolverTolerances)


@dataclass
class DecodeOutcome:
    x: np.ndarray
    integral: bool
    status: DecodeStatus
    iterations: int
    cuts_added_total: int
    final_parity_constraints: int
    lp_pivots_total: int
    elapsed_ns: int
    objective_value: float = 0.0
    objective_trace: list[float] = field(default_factory=list)
    resolve_pivots: list[int] = field(default_factory=list)
    lp_resolves: int = 0
    rpc_cuts_added: int = 0
    rpc_cycle_trials: int = 0
    rpc_repeated_visits: int = 0
    epsilon_int: float = 1e-6
    problem: LpProblem | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def elapsed(self) -> float:
        """Seconds."""
        return self.elapsed_ns / 1e9

    @property
    def hard_decision(self) -> np.ndarray:
        return (self.x > 0.5).astype(np.uint8)


def initial_constraints(gamma: np.ndarray) -> list[LinearConstraint]:
    """
    One bound per variable: x_i >= 0 when gamma_i >= 0, x_i <= 1 otherwise.
    Written as rows so they can be inspected. The solver itself enforces the
    full box and parks each variable on the same side through `active_bounds`.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    return [
        LinearConstraint(terms=((i, -1.0),), rhs=0.0)
        if g >= 0
        else LinearConstraint(terms=((i, 1.0),), rhs=1.0)
        for i, g in enumerate(gamma)
    ]


def _check_dimensions(code: ParityCheckCode, gamma: np.ndarray) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape != (code.n,):
        raise ValueError(f"LLR vector has shape {gamma.shape}, code length is {code.n}.")
    return gamma


def _is_integral(x: np.ndarray, epsilon_int: float) -> bool:
    return bool(np.all(np.abs(x - np.round(x)) <= epsilon_int))


class AdaptiveLpDecoder:
    """
    State of one cutting-plane decode. The RPC decoder drives the same object,
    adding rows of its own between fixed points.
    """

    def __init__(self, code: ParityCheckCode, gamma: np.ndarray, opts: DecodeOptions | None = None):
        self.code = code
        self.gamma = _check_dimensions(code, gamma)
        self.opts = opts or DecodeOptions()
        self.problem = LpProblem(objective=self.gamma)
        self.solution: LpSolution | None = None
        self.diagnostics = CutSearchDiagnostics()
        # Redundant rows whose inequalities are searched alongside the code's.
        self.extra_rows: list[CheckRow] = []
        self._present: set[tuple[tuple[int, ...], tuple[int, ...]]] = set()
        self.iterations = 0
        self.cuts_added = 0
        self.rpc_cuts_added = 0
        self.pivots = 0
        self.objective_trace: list[float] = []
        self.resolve_pivots: list[int] = []
        self._started_ns = time.perf_counter_ns()

    @property
    def lp_resolves(self) -> int:
        return max(self.iterations - 1, 0)

    def has_row(self, cut: Cut) -> bool:
        return cut.key in self._present

    @property
    def x(self) -> np.ndarray:
        if self.solution is None:
            raise RuntimeError("No LP has been solved yet.")
        return self.solution.x

    def _record(self, solution: LpSolution, resolve: bool) -> None:
        self.solution = solution
        self.iterations += 1
        self.pivots += solution.pivots
        self.objective_trace.append(solution.objective_value)
        if resolve:
            self.resolve_pivots.append(solution.pivots)
        log.trace(
            f"Iteration {self.iterations}: objective {solution.objective_value:.12g}, "
            f"{len(self.problem.constraints)} parity rows, {solution.pivots} pivots."
        )

    def _solve_initial(self) -> None:
        self._record(solve(self.problem, self.opts.tolerances), resolve=False)

    def fresh_cuts(self) -> list[Cut]:
        """Cuts at the current point that are not already rows of the LP."""
        x = self.x
        cuts = find_all_cuts(self.code, x, self.diagnostics, self.opts.epsilon_cut)
        for row in self.extra_rows:
            if (cut := find_cut_for_check(x, row.support, row, self.diagnostics, self.opts.epsilon_cut)):
                cuts.append(cut)
        fresh = [c for c in cuts if c.key not in self._present]
        if len(fresh) < len(cuts):
            log.debug(f"{len(cuts) - len(fresh)} cuts are rows already, violated within tolerance only.")
        if (cap := self.opts.max_cuts_per_iteration) is not None and len(fresh) > cap:
            fresh = sorted(fresh, key=lambda c: -c.violation)[:cap]
        return fresh

    def add_cuts(self, cuts: list[Cut]) -> None:
        """Appends the cuts as rows and re-optimizes."""
        new: list[LinearConstraint] = []
        for cut in cuts:
            if cut.key in self._present:
                continue
            self._present.add(cut.key)
            new.append(cut.to_constraint())
            if isinstance(cut.check, CheckRow):
                self.rpc_cuts_added += 1
        if not new:
            return
        previous = self.solution
        if previous is None:
            raise RuntimeError("Cuts can only be added after the initial solve.")
        solution = resolve_with_new_constraints(
            self.problem, previous, new, self.opts.warm_start, self.opts.tolerances
        )
        self.problem = self.problem.extended(new)
        self.cuts_added += len(new)
        self._record(solution, resolve=True)

    def add_redundant_row(self, row: CheckRow) -> None:
        if row not in self.extra_rows:
            self.extra_rows.append(row)

    def run_to_fixed_point(
        self, max_solves: int | None = None, deadline_ns: int | None = None
    ) -> DecodeStatus | None:
        """
        Alternates cut search and re-optimization. Returns None once no cut is
        left, LIMIT_EXCEEDED if `max_solves` LP solves in this call were not enough
        or `perf_counter_ns` passed `deadline_ns` with cuts still pending.
        """
        solves = 0
        if self.solution is None:
            self._solve_initial()
            solves += 1
        while True:
            if self.solution.status is not LpStatus.OPTIMAL:
                log.warning(f"LP stopped with status {self.solution.status}.")
                return DecodeStatus.LIMIT_EXCEEDED
            if not (cuts := self.fresh_cuts()):
                return None
            if max_solves is not None and solves >= max_solves:
                log.warning(f"{len(cuts)} cuts remain after {solves} LP solves, giving up.")
                return DecodeStatus.LIMIT_EXCEEDED
            if deadline_ns is not None and time.perf_counter_ns() > deadline_ns:
                log.debug(f"{len(cuts)} cuts remain at the wall-clock deadline.")
                return DecodeStatus.LIMIT_EXCEEDED
            self.add_cuts(cuts)
            solves += 1

    def is_integral(self) -> bool:
        return _is_integral(self.x, self.opts.epsilon_int)

    def outcome(self, status: DecodeStatus | None) -> DecodeOutcome:
        x = self.x
        integral = False
        if status is None:
            integral = self.is_integral() and self.code.is_codeword(np.round(x).astype(np.uint8))
            if self.is_integral() and not integral:
                log.error("Integral fixed point fails the parity audit, reporting it as fractional.")
            status = DecodeStatus.ML_CODEWORD if integral else DecodeStatus.PSEUDOCODEWORD
        if integral:
            x = np.round(x)
        outcome = DecodeOutcome(
            x=x,
            integral=integral,
            status=status,
            iterations=self.iterations,
            cuts_added_total=self.cuts_added,
            final_parity_constraints=len(self.problem.constraints),
            lp_pivots_total=self.pivots,
            elapsed_ns=time.perf_counter_ns() - self._started_ns,
            objective_value=float(self.gamma @ x),
            objective_trace=list(self.objective_trace),
            resolve_pivots=list(self.resolve_pivots),
            lp_resolves=self.lp_resolves,
            rpc_cuts_added=self.rpc_cuts_added,
            epsilon_int=self.opts.epsilon_int,
            problem=self.problem,
        )
        log.debug(
            f"Decode finished: {outcome.status}.",
            payload={
                "iterations": outcome.iterations,
                "parity_rows": outcome.final_parity_constraints,
                "pivots": outcome.lp_pivots_total,
                "objective": outcome.objective_value,
            },
        )
        return outcome


def decode_adaptive(
    code: ParityCheckCode, gamma: np.ndarray, opts: DecodeOptions | None = None
) -> DecodeOutcome:
    opts = opts or DecodeOptions()
    decoder = AdaptiveLpDecoder(code, gamma, opts)
    status = decoder.run_to_fixed_point(opts.max_iterations or code.n)
    return decoder.outcome(status)


def decode_standard(
    code: ParityCheckCode, gamma: np.ndarray, opts: DecodeOptions | None = None
) -> DecodeOutcome:
    """Single LP over every parity inequality of every check."""
    gamma = _check_dimensions(code, gamma)
    opts = opts or DecodeOptions()
    if (degree := code.max_check_degree) > MAX_STANDARD_DEGREE:
        raise DegreeGuardError(degree)
    started = time.perf_counter_ns()
    constraints = [c for j, row in enumerate(code.rows) for c in all_parity_constraints(row, check=j)]
    problem = LpProblem(objective=gamma, constraints=constraints)
    solution = solve(problem, opts.tolerances)

    x = solution.x
    if solution.status is not LpStatus.OPTIMAL:
        status, integral = DecodeStatus.LIMIT_EXCEEDED, False
    else:
        integral = _is_integral(x, opts.epsilon_int) and code.is_codeword(np.round(x).astype(np.uint8))
        status = DecodeStatus.ML_CODEWORD if integral else DecodeStatus.PSEUDOCODEWORD
    if integral:
        x = np.round(x)
    return DecodeOutcome(
        x=x,
        integral=integral,
        status=status,
        iterations=1,
        cuts_added_total=0,
        final_parity_constraints=len(constraints),
        lp_pivots_total=solution.pivots,
        elapsed_ns=time.perf_counter_ns() - started,
        objective_value=float(gamma @ x),
        objective_trace=[solution.objective_value],
        epsilon_int=opts.epsilon_int,
        problem=problem,
    )


# region Audits
def integer_coordinate_count(x: np.ndarray, epsilon_int: float = 1e-6) -> int:
    return int(np.sum(np.abs(x - np.round(x)) <= epsilon_int))


def verify_pseudocodeword_integrality(outcome: DecodeOutcome, q: int | None = None) -> bool:
    """A vertex with q parity rows has at least n - q coordinates at a bound."""
    q = outcome.final_parity_constraints if q is None else q
    return integer_coordinate_count(outcome.x, outcome.epsilon_int) >= outcome.n - q


def parity_audit(code: ParityCheckCode, outcome: DecodeOutcome) -> list[str]:
    """
    Bounds every cutting-plane decode must respect. Iteration and row bounds
    are only claimed for decodes without redundant rows.
    """
    problems: list[str] = []
    n, m = code.n, code.m
    if outcome.rpc_cuts_added == 0 and outcome.status is not DecodeStatus.LIMIT_EXCEEDED:
        if outcome.iterations > n:
            problems.append(f"{outcome.iterations} iterations exceed n = {n}")
        if outcome.final_parity_constraints + n > n * (m + 1):
            problems.append(
                f"{outcome.final_parity_constraints} parity rows plus {n} bounds exceed n(m+1) = {n * (m + 1)}"
            )
    if outcome.status is DecodeStatus.PSEUDOCODEWORD and not verify_pseudocodeword_integrality(outcome):
        problems.append(
            f"only {integer_coordinate_count(outcome.x, outcome.epsilon_int)} integral coordinates, "
            f"expected at least {n - outcome.final_parity_constraints}"
        )
    trace = outcome.objective_trace
    if any(b < a - 1e-7 * max(1.0, abs(a)) for a, b in zip(trace, trace[1:])):
        problems.append("LP objective decreased between iterations")
    for problem in problems:
        log.warning(f"Audit failure: {problem}.")
    return problems


# endregion Audits


def parity_rows_of(outcome: DecodeOutcome) -> list[ParityProvenance]:
    """Which inequality each LP row came from."""
    if outcome.problem is None:
        return []
    return [c.provenance for c in outcome.problem.constraints if isinstance(c.provenance, ParityProvenance)]
