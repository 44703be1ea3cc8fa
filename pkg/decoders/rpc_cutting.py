"""
title: RPC Cutting-Plane Decoder
id: rpc_cutting
description: Tightens a fractional LP decoding result with inequalities of redundant parity checks found by random walks on the fractional subgraph.
license: MIT
version: 0.3.0
requirements: numpy, networkx, pydantic, loguru
"""

# Graph nodes are ("v", i) for variables and ("c", j) for checks, so the
# fractional subgraph is a plain undirected bipartite networkx graph.
#
# Decode loop:
#   1. Run the adaptive decoder to its fixed point.
#   2. While x is fractional and the budget allows, walk the 2-core of the
#      fractional subgraph until a cycle closes, sum the rows of its checks over
#      GF(2) and look for a cut of that redundant row.
#   3. Add the cut, remember the row so later iterations search it too, and go
#      back to 1 with the current LP.

import time
from collections.abc import Iterable
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from codes.code_model import CheckRow, ParityCheckCode, combine_rows
from decoders.adaptive_lp import AdaptiveLpDecoder, DecodeOptions, DecodeOutcome
from solvers.cut_search import EPSILON_CUT, Cut, find_cut_for_check
from utils.decoding_types import DecodeStatus

log = logger.bind(lpdec=True)

Node = tuple[str, int]


class RpcBudget(BaseModel):
    c_max: int = Field(default=100, ge=1, description="Cycle searches per cut attempt.")
    lp_resolve_cap: int = Field(
        default=500,
        ge=1,
        description="Total LP re-solves allowed in one decode, adaptive phases included.",
    )
    t_max_ms: float | None = Field(
        default=None, gt=0, description="Optional wall-clock cap for one decode, in milliseconds."
    )
    batch_cuts: bool = Field(
        default=False,
        description="Keep searching after the first cut and add every cut found in the attempt.",
    )


@dataclass
class FractionalSubgraph:
    phi: frozenset[int]
    checks: frozenset[int]
    graph: nx.Graph = field(repr=False)
    clusters: list[frozenset[Node]] = field(default_factory=list, repr=False)

    @property
    def edges(self) -> list[tuple[int, int]]:
        """(variable, check) pairs."""
        return sorted(
            (a[1], b[1]) if a[0] == "v" else (b[1], a[1]) for a, b in self.graph.edges
        )

    def is_empty(self) -> bool:
        return not self.phi


def fractional_subgraph(
    code: ParityCheckCode, x: np.ndarray, epsilon_int: float = 1e-6
) -> FractionalSubgraph:
    x = np.asarray(x, dtype=np.float64)
    phi = frozenset(int(i) for i in np.flatnonzero(np.abs(x - np.round(x)) > epsilon_int))
    graph = nx.Graph()
    graph.add_nodes_from(("v", i) for i in phi)
    graph.add_edges_from((("v", i), ("c", j)) for i in phi for j in code.columns[i])
    checks = frozenset(j for kind, j in graph.nodes if kind == "c")
    clusters = sorted((frozenset(c) for c in nx.connected_components(graph)), key=min)
    return FractionalSubgraph(phi=phi, checks=checks, graph=graph, clusters=clusters)


def random_cycle_search(
    f: FractionalSubgraph, rng: np.random.Generator, step_cap: int | None = None
) -> frozenset[int] | None:
    """
    Random walk without immediate backtracking on the 2-core of f. Returns the
    checks of the first loop it closes, or None if the core is empty or the
    walk runs out of steps.
    """
    core = nx.k_core(f.graph, 2)
    if core.number_of_nodes() == 0:
        return None
    starts = sorted(node for node in core if node[0] == "c")
    current: Node = starts[int(rng.integers(len(starts)))]
    path = [current]
    position = {current: 0}
    previous: Node | None = None
    for _ in range(step_cap or 4 * f.graph.number_of_edges()):
        options = sorted(node for node in core.neighbors(current) if node != previous)
        if not options:
            return None
        following = options[int(rng.integers(len(options)))]
        if following in position:
            loop = path[position[following] :]
            return frozenset(j for kind, j in loop if kind == "c")
        position[following] = len(path)
        path.append(following)
        previous, current = current, following
    return None


def is_fractional_cycle(f: FractionalSubgraph, checks: Iterable[int]) -> bool:
    """True if some simple cycle of f visits exactly these checks."""
    wanted = {("c", j) for j in checks}
    if len(wanted) < 2 or not wanted <= set(f.graph.nodes):
        return False
    variables = {v for c in wanted for v in f.graph.neighbors(c)}
    shared = {v for v in variables if sum(1 for c in f.graph.neighbors(v) if c in wanted) >= 2}
    sub = f.graph.subgraph(wanted | shared)
    return any(
        {node for node in cycle if node[0] == "c"} == wanted
        for cycle in nx.simple_cycles(sub, length_bound=2 * len(wanted))
    )


def clusters_without_cycle(f: FractionalSubgraph) -> list[frozenset[Node]]:
    """Clusters that are trees. Empty at any fractional vertex of the relaxation."""
    return [
        cluster for cluster in f.clusters if nx.is_forest(f.graph.subgraph(cluster))
    ]


def try_rpc_cut(
    code: ParityCheckCode,
    x: np.ndarray,
    checks: Iterable[int],
    epsilon_cut: float = EPSILON_CUT,
) -> Cut | None:
    row = combine_rows(code, checks)
    if not row.support:
        return None
    return find_cut_for_check(x, row.support, row, epsilon_cut=epsilon_cut)


def _search_rpc_cuts(
    decoder: AdaptiveLpDecoder,
    budget: RpcBudget,
    rng: np.random.Generator,
    tried: set[frozenset[int]],
    counters: dict[str, int],
) -> list[Cut]:
    code, x = decoder.code, decoder.x
    f = fractional_subgraph(code, x, decoder.opts.epsilon_int)
    cuts: list[Cut] = []
    for _ in range(budget.c_max):
        counters["trials"] += 1
        if (checks := random_cycle_search(f, rng)) is None:
            log.debug("Fractional subgraph has no cycle to walk.")
            break
        if checks in tried:
            counters["repeated"] += 1
            continue
        tried.add(checks)
        cut = try_rpc_cut(code, x, checks, decoder.opts.epsilon_cut)
        if cut is None or decoder.has_row(cut) or cut in cuts:
            continue
        cuts.append(cut)
        if not budget.batch_cuts:
            break
    return cuts


def decode_with_rpc(
    code: ParityCheckCode,
    gamma: np.ndarray,
    opts: DecodeOptions | None = None,
    budget: RpcBudget | None = None,
    *,
    rng: np.random.Generator,
) -> DecodeOutcome:
    """
    Adaptive decoding followed by RPC cuts. Every LP re-solve of the decode,
    the adaptive phase included, counts against `budget.lp_resolve_cap`.
    """
    opts = opts or DecodeOptions()
    budget = budget or RpcBudget()
    deadline = (
        time.perf_counter_ns() + int(budget.t_max_ms * 1e6) if budget.t_max_ms is not None else None
    )

    decoder = AdaptiveLpDecoder(code, gamma, opts)
    # The first solve of the LP is not a re-solve.
    first_phase = min(opts.max_iterations or code.n, budget.lp_resolve_cap + 1)
    status = decoder.run_to_fixed_point(first_phase, deadline)
    tried: set[frozenset[int]] = set()
    counters = {"trials": 0, "repeated": 0}

    while status is None and not decoder.is_integral():
        remaining = budget.lp_resolve_cap - decoder.lp_resolves
        if remaining <= 0:
            log.debug(f"LP re-solve cap {budget.lp_resolve_cap} reached.")
            status = DecodeStatus.LIMIT_EXCEEDED
            break
        if deadline is not None and time.perf_counter_ns() > deadline:
            log.debug(f"Wall-clock cap of {budget.t_max_ms} ms reached.")
            status = DecodeStatus.LIMIT_EXCEEDED
            break
        if not (cuts := _search_rpc_cuts(decoder, budget, rng, tried, counters)):
            break
        for cut in cuts:
            if isinstance(cut.check, CheckRow):
                decoder.add_redundant_row(cut.check)
        decoder.add_cuts(cuts)
        status = decoder.run_to_fixed_point(min(code.n, remaining - 1), deadline)

    outcome = decoder.outcome(status)
    outcome.rpc_cycle_trials = counters["trials"]
    outcome.rpc_repeated_visits = counters["repeated"]
    if counters["repeated"] and outcome.status is DecodeStatus.PSEUDOCODEWORD:
        log.debug(
            f"No RPC cut found, {counters['repeated']} cycle searches returned check sets already tried."
        )
    return outcome
