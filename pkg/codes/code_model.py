"""
title: Code Model
id: code_model
description: Binary linear codes as sparse parity-check matrices. alist I/O, random regular LDPC generation, GF(2) row combination and codeword enumeration.
license: MIT
version: 0.3.0
requirements: numpy, loguru
"""

# Indices are 0-based everywhere in memory and 1-based only inside alist text.

from dataclasses import dataclass, field
from functools import cached_property, lru_cache, reduce
from pathlib import Path
from collections.abc import Iterable

import numpy as np
from loguru import logger

log = logger.bind(lpdec=True)

MAX_ENUMERABLE_LENGTH = 28
REPAIR_ROUNDS = 200


# region Exceptions
class CodeStructureError(ValueError):
    """Raised when a parity-check matrix breaks one of the code invariants."""

    def __init__(self, message: str):
        log.error(message)
        super().__init__(message)


class AlistFormatError(CodeStructureError):
    """alist parse failure, carries the 1-based line number of the offending line."""

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class EnumerationTooLargeError(ValueError):
    def __init__(self, n: int):
        message = f"Refusing to enumerate codewords of a length-{n} code (limit {MAX_ENUMERABLE_LENGTH})."
        log.error(message)
        super().__init__(message)


# endregion Exceptions


# region Types
def _check_support(support: tuple[int, ...], n: int, what: str) -> None:
    for a, b in zip(support, support[1:]):
        if a >= b:
            raise CodeStructureError(f"{what} is not strictly increasing: {support}")
    if support and not (0 <= support[0] and support[-1] < n):
        raise CodeStructureError(f"{what} has an index outside [0, {n}): {support}")


@dataclass(frozen=True)
class CheckRow:
    """A single parity check, possibly redundant (a GF(2) sum of code rows)."""

    support: tuple[int, ...]
    # Code rows this check was combined from.
    origin: frozenset[int] = field(default_factory=frozenset)

    def __len__(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class ParityCheckCode:
    n: int
    rows: tuple[tuple[int, ...], ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise CodeStructureError(f"Code length must be positive, got {self.n}.")
        for j, row in enumerate(self.rows):
            if not row:
                raise CodeStructureError(f"Check {j} is empty.")
            _check_support(row, self.n, f"Check {j}")
            if len(row) < 2:
                raise CodeStructureError(
                    f"Check {j} has degree 1 and would force variable {row[0]} to zero."
                )

    @property
    def m(self) -> int:
        return len(self.rows)

    @cached_property
    def columns(self) -> tuple[tuple[int, ...], ...]:
        """Per-variable sorted list of incident checks (transpose of rows)."""
        cols: list[list[int]] = [[] for _ in range(self.n)]
        for j, row in enumerate(self.rows):
            for i in row:
                cols[i].append(j)
        return tuple(tuple(c) for c in cols)

    @property
    def check_degrees(self) -> list[int]:
        return [len(r) for r in self.rows]

    @property
    def variable_degrees(self) -> list[int]:
        return [len(c) for c in self.columns]

    @property
    def max_check_degree(self) -> int:
        return max(self.check_degrees, default=0)

    def neighborhood(self, check: int) -> tuple[int, ...]:
        return self.rows[check]

    def dense(self) -> np.ndarray:
        H = np.zeros((self.m, self.n), dtype=np.uint8)
        for j, row in enumerate(self.rows):
            H[j, list(row)] = 1
        return H

    @classmethod
    def from_dense(cls, H: np.ndarray | list[list[int]], name: str = "") -> "ParityCheckCode":
        H = np.asarray(H, dtype=np.uint8) % 2
        rows = tuple(tuple(int(i) for i in np.flatnonzero(r)) for r in H)
        return cls(n=H.shape[1], rows=rows, name=name)

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64)
        return np.array([int(bits[list(row)].sum()) & 1 for row in self.rows], dtype=np.uint8)

    def is_codeword(self, bits: np.ndarray) -> bool:
        return not self.syndrome(bits).any()

    def four_cycle_count(self) -> int:
        """Number of check pairs sharing two or more variables."""
        count = 0
        sets = [set(r) for r in self.rows]
        for a in range(self.m):
            for b in range(a + 1, self.m):
                if len(sets[a] & sets[b]) >= 2:
                    count += 1
        return count


# endregion Types


# region alist I/O
def parse_alist(text: str) -> ParityCheckCode:
    """
    Parses MacKay's alist format. Blank lines are skipped, zero entries are
    padding. Every error names the 1-based line it was found on.
    """
    lines = [
        (no, [tok for tok in raw.split()])
        for no, raw in enumerate(text.splitlines(), start=1)
        if raw.strip()
    ]
    cursor = iter(lines)

    def next_ints(what: str) -> tuple[int, list[int]]:
        try:
            no, tokens = next(cursor)
        except StopIteration:
            last = lines[-1][0] if lines else 0
            raise AlistFormatError(f"unexpected end of input while reading {what}", last + 1)
        try:
            return no, [int(t) for t in tokens]
        except ValueError:
            raise AlistFormatError(f"non-integer token while reading {what}: {tokens}", no)

    no, header = next_ints("header")
    if len(header) != 2 or min(header) < 1:
        raise AlistFormatError(f"header must be 'n m' with positive entries, got {header}", no)
    n, m = header

    no, maxima = next_ints("maximum degrees")
    if len(maxima) != 2:
        raise AlistFormatError(f"expected 'max_dv max_dc', got {maxima}", no)
    max_dv, max_dc = maxima

    no, col_degrees = next_ints("column degrees")
    if len(col_degrees) != n:
        raise AlistFormatError(f"expected {n} column degrees, got {len(col_degrees)}", no)
    if max(col_degrees) != max_dv:
        raise AlistFormatError(f"max column degree {max(col_degrees)} != declared {max_dv}", no)

    no, row_degrees = next_ints("row degrees")
    if len(row_degrees) != m:
        raise AlistFormatError(f"expected {m} row degrees, got {len(row_degrees)}", no)
    if max(row_degrees) != max_dc:
        raise AlistFormatError(f"max row degree {max(row_degrees)} != declared {max_dc}", no)
    if sum(row_degrees) != sum(col_degrees):
        raise AlistFormatError(
            f"row degrees sum to {sum(row_degrees)} but column degrees sum to {sum(col_degrees)}", no
        )

    def read_lists(count: int, degrees: list[int], bound: int, what: str):
        result: list[tuple[int, list[int]]] = []
        for k in range(count):
            no, entries = next_ints(f"{what} {k + 1}")
            entries = [e for e in entries if e != 0]
            if len(entries) != degrees[k]:
                raise AlistFormatError(
                    f"{what} {k + 1} lists {len(entries)} entries, degree says {degrees[k]}", no
                )
            for e in entries:
                if not 1 <= e <= bound:
                    raise AlistFormatError(f"{what} {k + 1} index {e} out of range 1..{bound}", no)
            if len(set(entries)) != len(entries):
                raise AlistFormatError(f"{what} {k + 1} has a duplicate index: {entries}", no)
            result.append((no, [e - 1 for e in entries]))
        return result

    col_lists = read_lists(n, col_degrees, m, "column")
    row_lists = read_lists(m, row_degrees, n, "row")

    edges_from_rows = {(j, i) for j, (_, row) in enumerate(row_lists) for i in row}
    for i, (no, col) in enumerate(col_lists):
        for j in col:
            if (j, i) not in edges_from_rows:
                raise AlistFormatError(
                    f"column {i + 1} lists row {j + 1} but row {j + 1} does not list column {i + 1}", no
                )

    for j, (no, row) in enumerate(row_lists):
        if len(row) < 2:
            raise AlistFormatError(f"row {j + 1} has degree {len(row)}, checks need degree >= 2", no)

    rows = tuple(tuple(sorted(row)) for _, row in row_lists)
    return ParityCheckCode(n=n, rows=rows)


def emit_alist(code: ParityCheckCode) -> str:
    col_degrees = code.variable_degrees
    row_degrees = code.check_degrees
    max_dv, max_dc = max(col_degrees), max(row_degrees)

    def padded(entries: Iterable[int], width: int) -> str:
        values = [e + 1 for e in entries]
        values += [0] * (width - len(values))
        return " ".join(str(v) for v in values)

    lines = [
        f"{code.n} {code.m}",
        f"{max_dv} {max_dc}",
        " ".join(str(d) for d in col_degrees),
        " ".join(str(d) for d in row_degrees),
    ]
    lines += [padded(col, max_dv) for col in code.columns]
    lines += [padded(row, max_dc) for row in code.rows]
    return "\n".join(lines) + "\n"


def load_alist(path: str | Path) -> ParityCheckCode:
    path = Path(path)
    code = parse_alist(path.read_text())
    log.info(f"Loaded {code.m}x{code.n} parity-check matrix from {path}.")
    return ParityCheckCode(n=code.n, rows=code.rows, name=path.stem)


# endregion alist I/O


# region Construction
def _parallel_edges(var_sockets: np.ndarray, check_sockets: np.ndarray, m: int) -> np.ndarray:
    """Socket indices that repeat an earlier (variable, check) pair."""
    pairs = var_sockets * m + check_sockets
    _, first_index = np.unique(pairs, return_index=True)
    duplicated = np.ones(pairs.size, dtype=bool)
    duplicated[first_index] = False
    return np.flatnonzero(duplicated)


def random_regular_ldpc(n: int, dv: int, dc: int, seed: int) -> ParityCheckCode:
    """
    Configuration-model (dv, dc)-regular code: variable sockets are paired with
    a random permutation of check sockets, then parallel edges are removed by
    swapping check endpoints with randomly chosen edges.
    """
    if dv < 2 or dc < 2:
        raise CodeStructureError(f"Degrees must be >= 2, got dv={dv}, dc={dc}.")
    if (n * dv) % dc:
        raise CodeStructureError(f"n*dv = {n * dv} is not divisible by dc = {dc}.")
    m = n * dv // dc
    if dc > n:
        raise CodeStructureError(f"Check degree {dc} exceeds code length {n}.")

    rng = np.random.default_rng(seed)
    var_sockets = np.repeat(np.arange(n), dv)
    check_sockets = rng.permutation(np.repeat(np.arange(m), dc))

    bad = _parallel_edges(var_sockets, check_sockets, m)
    for round_no in range(REPAIR_ROUNDS):
        if bad.size == 0:
            break
        log.trace(f"Repair round {round_no}: {bad.size} parallel edges.")
        pairs = var_sockets * m + check_sockets
        edge_set = set(pairs.tolist())
        for e in bad:
            f = int(rng.integers(pairs.size))
            v_e, c_e = int(var_sockets[e]), int(check_sockets[e])
            v_f, c_f = int(var_sockets[f]), int(check_sockets[f])
            if c_e == c_f or v_e == v_f:
                continue
            if v_e * m + c_f in edge_set or v_f * m + c_e in edge_set:
                continue
            edge_set.discard(v_f * m + c_f)
            edge_set.add(v_e * m + c_f)
            edge_set.add(v_f * m + c_e)
            check_sockets[e], check_sockets[f] = c_f, c_e
        bad = _parallel_edges(var_sockets, check_sockets, m)
    if bad.size:
        raise CodeStructureError(
            f"Could not remove parallel edges of a ({dv},{dc}) code of length {n} "
            f"within {REPAIR_ROUNDS} repair rounds (seed {seed})."
        )

    rows: list[set[int]] = [set() for _ in range(m)]
    for v, c in zip(var_sockets.tolist(), check_sockets.tolist()):
        rows[c].add(v)
    code = ParityCheckCode(
        n=n,
        rows=tuple(tuple(sorted(r)) for r in rows),
        name=f"gen-{n}-{dv}-{dc}-s{seed}",
    )
    log.debug(f"Generated {code.name} with {code.four_cycle_count()} four-cycles.")
    return code


def combine_rows(code: ParityCheckCode, checks: Iterable[int]) -> CheckRow:
    """GF(2) sum of the selected rows, i.e. the symmetric difference of their supports."""
    selected = frozenset(checks)
    if not selected:
        raise CodeStructureError("Cannot combine an empty set of checks.")
    invalid = [j for j in selected if not 0 <= j < code.m]
    if invalid:
        raise CodeStructureError(f"Check indices out of range 0..{code.m - 1}: {sorted(invalid)}")
    support = reduce(lambda acc, j: acc ^ set(code.rows[j]), selected, set())
    return CheckRow(support=tuple(sorted(support)), origin=selected)


# endregion Construction


# region GF(2) linear algebra
def gf2_rref(M: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row-echelon form over GF(2). Returns (R, pivot_cols)."""
    R = (np.asarray(M, dtype=np.uint8) % 2).copy()
    rows, cols = R.shape
    pivot_cols: list[int] = []
    pivot_row = 0
    for col in range(cols):
        if pivot_row == rows:
            break
        candidates = np.flatnonzero(R[pivot_row:, col]) + pivot_row
        if candidates.size == 0:
            continue
        found = candidates[0]
        if found != pivot_row:
            R[[pivot_row, found]] = R[[found, pivot_row]]
        others = np.flatnonzero(R[:, col])
        others = others[others != pivot_row]
        R[others] ^= R[pivot_row]
        pivot_cols.append(col)
        pivot_row += 1
    return R, pivot_cols


def gf2_rank(M: np.ndarray) -> int:
    return len(gf2_rref(M)[1])


def gf2_nullspace(M: np.ndarray) -> np.ndarray:
    """Basis of {x : Mx = 0} over GF(2), one basis vector per row."""
    R, pivots = gf2_rref(M)
    n = R.shape[1]
    free = [c for c in range(n) if c not in set(pivots)]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for k, f in enumerate(free):
        basis[k, f] = 1
        for r, p in enumerate(pivots):
            basis[k, p] = R[r, f]
    return basis


@lru_cache(maxsize=8)
def enumerate_codewords(code: ParityCheckCode) -> np.ndarray:
    """All 2^(n - rank) codewords as rows of a read-only uint8 array."""
    if code.n > MAX_ENUMERABLE_LENGTH:
        raise EnumerationTooLargeError(code.n)
    basis = gf2_nullspace(code.dense())
    k = basis.shape[0]
    coefficients = (np.arange(2**k, dtype=np.int64)[:, None] >> np.arange(k)) & 1
    codewords = (coefficients @ basis.astype(np.int64) % 2).astype(np.uint8)
    codewords.setflags(write=False)
    log.debug(f"Enumerated {codewords.shape[0]} codewords of a length-{code.n} code.")
    return codewords


# endregion GF(2) linear algebra
