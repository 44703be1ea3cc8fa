"""
title: Bounded-Variable Simplex
id: bounded_simplex
description: Dense revised simplex for min c'x s.t. Ax <= b, 0 <= x <= 1 with incremental rows and warm starts.
license: MIT
version: 0.4.0
requirements: numpy, pydantic, loguru
"""

# Solver outline:
#   - Structural variables x_i live in the box [0, 1]; every row gets a slack s >= 0.
#   - The all-slack basis with each x_i parked on the bound favoured by the sign of c_i
#     is dual feasible, so a cold solve is a dual simplex run from that vertex.
#   - A warm solve keeps the previous optimal basis and makes the new slacks basic.
#     The reduced costs do not change, the point is primal infeasible, and the dual
#     simplex walks it back into the feasible region.
#   - A short primal simplex pass afterwards removes any dual infeasibility left by
#     rounding, so Optimal always means primal and dual feasible within tolerance.
#   - Pricing is Dantzig's rule; after `bland_after` pivots without progress both
#     phases switch to Bland's smallest-index rule.

from collections.abc import Hashable, Sequence
from dataclasses import dataclass, field
from enum import IntEnum, StrEnum

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

log = logger.bind(lpdec=True)


class LpSolverError(RuntimeError):
    def __init__(self, message: str):
        log.error(message)
        super().__init__(message)


class BoundSide(IntEnum):
    LOWER = 0
    UPPER = 1


class LpStatus(StrEnum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    ITERATION_LIMIT = "IterationLimit"


class SolverTolerances(BaseModel):
    feasibility: float = Field(default=1e-9, gt=0, description="Allowed bound and row violation.")
    optimality: float = Field(default=1e-9, gt=0, description="Reduced-cost tolerance.")
    pivot: float = Field(default=1e-10, gt=0, description="Smallest usable pivot element.")
    max_pivots: int = Field(default=100_000, ge=1, description="Pivot budget per solve.")
    bland_after: int = Field(
        default=50, ge=1, description="Pivots without objective progress before Bland's rule."
    )
    refactor_every: int = Field(
        default=50, ge=1, description="Pivots between explicit basis re-inversions."
    )


# region Problem types
@dataclass(frozen=True)
class LinearConstraint:
    """sum(coef * x[index]) <= rhs."""

    terms: tuple[tuple[int, float], ...]
    rhs: float
    provenance: Hashable | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.terms:
            raise ValueError("A constraint needs at least one term.")
        indices = [i for i, _ in self.terms]
        if len(set(indices)) != len(indices):
            raise ValueError(f"Duplicate variable index in constraint terms: {indices}")
        if min(indices) < 0:
            raise ValueError(f"Negative variable index in constraint terms: {indices}")

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.terms]

    @property
    def coefficients(self) -> list[float]:
        return [a for _, a in self.terms]

    def lhs(self, x: np.ndarray) -> float:
        return float(np.dot(self.coefficients, np.asarray(x)[self.indices]))

    def violation(self, x: np.ndarray) -> float:
        return self.lhs(x) - self.rhs


@dataclass
class LpProblem:
    objective: np.ndarray
    # Append-only: the dense cache assumes earlier rows never change.
    constraints: list[LinearConstraint] = field(default_factory=list)
    active_bounds: np.ndarray | None = None
    _dense_rows: np.ndarray | None = field(default=None, repr=False, compare=False)
    _dense_rhs: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=np.float64)
        if self.objective.ndim != 1:
            raise ValueError("Objective must be a vector.")
        if self.active_bounds is None:
            self.active_bounds = np.where(self.objective < 0, BoundSide.UPPER, BoundSide.LOWER)
        self.active_bounds = np.asarray(self.active_bounds, dtype=np.int8)
        if self.active_bounds.shape != self.objective.shape:
            raise ValueError("active_bounds must have one entry per variable.")
        for c in self.constraints:
            if max(c.indices) >= self.n:
                raise ValueError(f"Constraint index {max(c.indices)} >= n = {self.n}")

    @property
    def n(self) -> int:
        return self.objective.shape[0]

    def extended(self, new: Sequence[LinearConstraint]) -> "LpProblem":
        problem = LpProblem(
            objective=self.objective,
            constraints=[*self.constraints, *new],
            active_bounds=self.active_bounds,
        )
        if self._dense_rows is not None:
            problem._dense_rows, problem._dense_rhs = self._dense_rows, self._dense_rhs
        return problem

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        cached = 0 if self._dense_rows is None else self._dense_rows.shape[0]
        if cached != len(self.constraints) or self._dense_rows is None:
            fresh = self.constraints[cached:]
            A_new = np.zeros((len(fresh), self.n))
            b_new = np.empty(len(fresh))
            for r, c in enumerate(fresh):
                A_new[r, c.indices] = c.coefficients
                b_new[r] = c.rhs
            if self._dense_rows is None:
                self._dense_rows, self._dense_rhs = A_new, b_new
            else:
                self._dense_rows = np.vstack([self._dense_rows, A_new])
                self._dense_rhs = np.concatenate([self._dense_rhs, b_new])
        return self._dense_rows, self._dense_rhs


@dataclass(frozen=True)
class SimplexBasis:
    """Opaque warm-start token. Indices >= n refer to row slacks."""

    basic: tuple[int, ...]
    at_upper: np.ndarray
    inverse: np.ndarray


@dataclass
class LpSolution:
    x: np.ndarray
    objective_value: float
    status: LpStatus
    basis: SimplexBasis | None = None
    pivots: int = 0
    dual_pivots: int = 0
    primal_pivots: int = 0


# endregion Problem types


class BoundedSimplex:
    """One solve. Instances own their arrays and are not shared between threads."""

    def __init__(
        self,
        A: np.ndarray,
        b: np.ndarray,
        c: np.ndarray,
        tolerances: SolverTolerances,
        active_bounds: np.ndarray | None = None,
    ):
        self.A, self.b, self.c = A, b, c
        self.k, self.n = A.shape
        self.tol = tolerances
        self.at_upper = (
            np.asarray(active_bounds) == BoundSide.UPPER
            if active_bounds is not None
            else c < 0
        )
        self.pivots = 0
        self.dual_pivots = 0
        self.primal_pivots = 0
        self._since_refactor = 0
        self._reset_to_slack_basis()

    # region 1. Basis bookkeeping
    def _reset_to_slack_basis(self) -> None:
        self.basic = np.arange(self.n, self.n + self.k)
        self.is_basic = np.zeros(self.n + self.k, dtype=bool)
        self.is_basic[self.basic] = True
        self.Binv = np.eye(self.k)

    def load_warm_basis(self, basis: SimplexBasis) -> None:
        """Previous optimal basis extended by the slacks of the rows added since."""
        k_old = basis.inverse.shape[0]
        added = self.k - k_old
        if added < 0:
            raise LpSolverError("Warm basis has more rows than the problem.")
        basic_old = np.asarray(basis.basic, dtype=np.int64)
        structural = basic_old < self.n
        A_added_B = np.zeros((added, k_old))
        A_added_B[:, structural] = self.A[k_old:, basic_old[structural]]
        self.Binv = np.block(
            [
                [basis.inverse, np.zeros((k_old, added))],
                [-A_added_B @ basis.inverse, np.eye(added)],
            ]
        )
        self.basic = np.concatenate([basic_old, self.n + k_old + np.arange(added)])
        self.is_basic = np.zeros(self.n + self.k, dtype=bool)
        self.is_basic[self.basic] = True
        self.at_upper = basis.at_upper.copy()

    def _column(self, j: int) -> np.ndarray:
        if j < self.n:
            return self.A[:, j]
        e = np.zeros(self.k)
        e[j - self.n] = 1.0
        return e

    def _refactor(self) -> None:
        if self.k == 0:
            return
        B = np.zeros((self.k, self.k))
        structural = self.basic < self.n
        B[:, structural] = self.A[:, self.basic[structural]]
        slack_pos = np.flatnonzero(~structural)
        B[self.basic[slack_pos] - self.n, slack_pos] = 1.0
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as e:
            raise LpSolverError(f"Basis matrix became singular: {e}") from e
        self._since_refactor = 0

    def _pivot(self, r: int, q: int) -> None:
        w = self.Binv @ self._column(q)
        if abs(w[r]) < self.tol.pivot:
            raise LpSolverError(f"Pivot element {w[r]:.3e} below threshold at row {r}.")
        row = self.Binv[r] / w[r]
        self.Binv -= np.outer(w, row)
        self.Binv[r] = row
        leaving = self.basic[r]
        self.is_basic[leaving] = False
        self.is_basic[q] = True
        self.basic[r] = q
        if q < self.n:
            self.at_upper[q] = False
        self.pivots += 1
        self._since_refactor += 1
        if self._since_refactor >= self.tol.refactor_every:
            self._refactor()

    # endregion 1. Basis bookkeeping

    # region 2. Primal and dual quantities
    def _basic_values(self) -> np.ndarray:
        x_nonbasic = self.at_upper.astype(np.float64)
        x_nonbasic[self.basic[self.basic < self.n]] = 0.0
        return self.Binv @ (self.b - self.A @ x_nonbasic)

    def _basic_upper(self) -> np.ndarray:
        return np.where(self.basic < self.n, 1.0, np.inf)

    def _reduced_costs(self) -> np.ndarray:
        c_B = np.where(self.basic < self.n, self.c[np.minimum(self.basic, self.n - 1)], 0.0)
        y = c_B @ self.Binv
        d = np.concatenate([self.c - y @ self.A, -y])
        d[self.basic] = 0.0
        return d

    def _upper_flags(self) -> np.ndarray:
        return np.concatenate([self.at_upper, np.zeros(self.k, dtype=bool)])

    def structural_values(self) -> np.ndarray:
        x = self.at_upper.astype(np.float64)
        structural = self.basic < self.n
        x[self.basic[structural]] = self._basic_values()[structural]
        return x

    # endregion 2. Primal and dual quantities

    # region 3. Simplex phases
    def _restore_dual_feasibility(self) -> None:
        """Move nonbasic box variables to the bound their reduced cost prefers."""
        d = self._reduced_costs()
        opt = self.tol.optimality
        nonbasic_slacks = ~self.is_basic[self.n :]
        if np.any(nonbasic_slacks & (d[self.n :] < -opt)):
            log.debug("Warm basis is dual infeasible on a slack, restarting from the slack basis.")
            self._reset_to_slack_basis()
            d = self._reduced_costs()
        structural_nonbasic = ~self.is_basic[: self.n]
        d_struct = d[: self.n]
        self.at_upper[structural_nonbasic & (d_struct < -opt)] = True
        self.at_upper[structural_nonbasic & (d_struct > opt)] = False

    def _dual_phase(self) -> LpStatus:
        tol = self.tol
        best_objective = -np.inf
        stalled = 0
        bland = False
        while True:
            x_B = self._basic_values()
            below = -x_B
            above = x_B - self._basic_upper()
            violation = np.maximum(below, above)
            rows = np.flatnonzero(violation > tol.feasibility)
            if rows.size == 0:
                return LpStatus.OPTIMAL
            if self.pivots >= tol.max_pivots:
                return LpStatus.ITERATION_LIMIT

            if bland:
                r = int(rows[np.argmin(self.basic[rows])])
            else:
                r = int(rows[np.argmax(violation[rows])])
            leaving_below = below[r] > above[r]

            d = self._reduced_costs()
            alpha = np.concatenate([self.Binv[r] @ self.A, self.Binv[r]])
            nonbasic = ~self.is_basic
            upper = self._upper_flags()
            increasing = nonbasic & ~upper
            decreasing = nonbasic & upper
            if leaving_below:
                eligible = (increasing & (alpha < -tol.pivot)) | (decreasing & (alpha > tol.pivot))
            else:
                eligible = (increasing & (alpha > tol.pivot)) | (decreasing & (alpha < -tol.pivot))
            candidates = np.flatnonzero(eligible)
            if candidates.size == 0:
                return LpStatus.INFEASIBLE

            ratios = np.abs(d[candidates]) / np.abs(alpha[candidates])
            ties = candidates[ratios <= ratios.min() + tol.optimality]
            if bland:
                q = int(ties.min())
            else:
                q = int(ties[np.argmax(np.abs(alpha[ties]))])

            leaving = int(self.basic[r])
            self._pivot(r, q)
            if leaving < self.n:
                self.at_upper[leaving] = not leaving_below
            self.dual_pivots += 1

            objective = float(self.c @ self.structural_values())
            if objective > best_objective + tol.optimality:
                best_objective = objective
                stalled = 0
            else:
                stalled += 1
                if not bland and stalled >= tol.bland_after:
                    log.trace(f"Dual simplex stalled for {stalled} pivots, switching to Bland's rule.")
                    bland = True

    def _primal_phase(self) -> LpStatus:
        tol = self.tol
        degenerate = 0
        bland = False
        while True:
            d = self._reduced_costs()
            upper = self._upper_flags()
            nonbasic = ~self.is_basic
            improving = nonbasic & ((~upper & (d < -tol.optimality)) | (upper & (d > tol.optimality)))
            candidates = np.flatnonzero(improving)
            if candidates.size == 0:
                return LpStatus.OPTIMAL
            if self.pivots >= tol.max_pivots:
                return LpStatus.ITERATION_LIMIT
            q = int(candidates.min()) if bland else int(candidates[np.argmax(np.abs(d[candidates]))])

            direction = -1.0 if upper[q] else 1.0
            delta = direction * (self.Binv @ self._column(q))
            x_B = self._basic_values()
            ub = self._basic_upper()

            # x_B(t) = x_B - t * delta
            ratios = np.full(self.k, np.inf)
            to_upper = np.zeros(self.k, dtype=bool)
            falling = delta > tol.pivot
            ratios[falling] = np.maximum(x_B[falling], 0.0) / delta[falling]
            rising = (delta < -tol.pivot) & np.isfinite(ub)
            ratios[rising] = np.maximum(ub[rising] - x_B[rising], 0.0) / -delta[rising]
            to_upper[rising] = True

            flip_length = 1.0 if q < self.n else np.inf
            step = ratios.min() if self.k else np.inf
            if flip_length <= step:
                if not np.isfinite(flip_length):
                    raise LpSolverError(f"Unbounded ray along slack {q - self.n}.")
                self.at_upper[q] = not self.at_upper[q]
                self.pivots += 1
                self.primal_pivots += 1
                degenerate = 0
                continue

            ties = np.flatnonzero(ratios <= step + tol.feasibility)
            if bland:
                r = int(ties[np.argmin(self.basic[ties])])
            else:
                r = int(ties[np.argmax(np.abs(delta[ties]))])
            leaving = int(self.basic[r])
            self._pivot(r, q)
            if leaving < self.n:
                self.at_upper[leaving] = bool(to_upper[r])
            self.primal_pivots += 1

            if step <= tol.feasibility:
                degenerate += 1
                if not bland and degenerate >= tol.bland_after:
                    log.trace(f"{degenerate} degenerate primal pivots, switching to Bland's rule.")
                    bland = True
            else:
                degenerate = 0

    def run(self) -> LpStatus:
        self._restore_dual_feasibility()
        status = self._dual_phase()
        if status is LpStatus.OPTIMAL:
            status = self._primal_phase()
        return status

    # endregion 3. Simplex phases

    def solution(self, status: LpStatus) -> LpSolution:
        x = self.structural_values()
        if status is LpStatus.OPTIMAL:
            x = np.clip(x, 0.0, 1.0)
        basis = SimplexBasis(
            basic=tuple(int(j) for j in self.basic),
            at_upper=self.at_upper.copy(),
            inverse=self.Binv.copy(),
        )
        return LpSolution(
            x=x,
            objective_value=float(self.c @ x),
            status=status,
            basis=basis,
            pivots=self.pivots,
            dual_pivots=self.dual_pivots,
            primal_pivots=self.primal_pivots,
        )


# region Public API
def solve(problem: LpProblem, tolerances: SolverTolerances | None = None) -> LpSolution:
    tolerances = tolerances or SolverTolerances()
    A, b = problem.matrix()
    engine = BoundedSimplex(A, b, problem.objective, tolerances, problem.active_bounds)
    status = engine.run()
    solution = engine.solution(status)
    _report(problem, solution, tolerances, warm=False)
    return solution


def resolve_with_new_constraints(
    problem: LpProblem,
    previous: LpSolution,
    new: Sequence[LinearConstraint],
    warm: bool = True,
    tolerances: SolverTolerances | None = None,
) -> LpSolution:
    """
    Solves `problem` with `new` appended. `previous` must be the optimum of
    `problem`; with `warm` its basis seeds the dual simplex.
    """
    tolerances = tolerances or SolverTolerances()
    full = problem.extended(new)
    if not warm or previous.basis is None or previous.status is not LpStatus.OPTIMAL:
        return solve(full, tolerances)
    A, b = full.matrix()
    engine = BoundedSimplex(A, b, full.objective, tolerances)
    engine.load_warm_basis(previous.basis)
    status = engine.run()
    solution = engine.solution(status)
    _report(full, solution, tolerances, warm=True)
    return solution


def _report(
    problem: LpProblem, solution: LpSolution, tolerances: SolverTolerances, warm: bool
) -> None:
    if solution.status is not LpStatus.OPTIMAL:
        log.warning(
            f"LP ended with status {solution.status} after {solution.pivots} pivots "
            f"({len(problem.constraints)} rows, warm={warm})."
        )
        return
    if problem.constraints:
        A, b = problem.matrix()
        worst = float(np.max(A @ solution.x - b))
        if worst > 10 * tolerances.feasibility:
            log.warning(f"Optimal point violates a row by {worst:.3e}.")
    log.trace(
        "LP solved.",
        payload={
            "rows": len(problem.constraints),
            "warm": warm,
            "pivots": solution.pivots,
            "dual_pivots": solution.dual_pivots,
            "primal_pivots": solution.primal_pivots,
            "objective": solution.objective_value,
        },
    )


def tight_constraint_rank(problem: LpProblem, solution: LpSolution, tol: float = 1e-7) -> int:
    """Rank of the normals of all rows and box sides that are tight at solution.x."""
    x = solution.x
    normals: list[np.ndarray] = []
    if problem.constraints:
        A, b = problem.matrix()
        normals.extend(A[np.abs(A @ x - b) <= tol])
    eye = np.eye(problem.n)
    normals.extend(-eye[x <= tol])
    normals.extend(eye[x >= 1 - tol])
    if not normals:
        return 0
    return int(np.linalg.matrix_rank(np.vstack(normals), tol=1e-9))


def format_lp(problem: LpProblem, name: str = "lp_decoding") -> str:
    """
    Plain-text dump in LP-file style:

        \\ <name>
        Minimize
         obj: +0.5 x0 -1.2 x1 ...
        Subject To
         r0: +1 x0 -1 x3 <= 0
        Bounds
         0 <= x0 <= 1
        End
    """

    def linear(terms) -> str:
        return " ".join(f"{coef:+.17g} x{i}" for i, coef in terms) or "0"

    lines = [f"\\ {name}", "Minimize"]
    lines.append(" obj: " + linear((i, c) for i, c in enumerate(problem.objective) if c != 0))
    lines.append("Subject To")
    for r, constraint in enumerate(problem.constraints):
        lines.append(f" r{r}: {linear(constraint.terms)} <= {constraint.rhs:.17g}")
    lines.append("Bounds")
    lines.extend(f" 0 <= x{i} <= 1" for i in range(problem.n))
    lines.append("End")
    return "\n".join(lines) + "\n"


# endregion Public API
