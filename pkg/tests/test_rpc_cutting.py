import numpy as np
import pytest

from codes.channel import block_rng, llr_awgn, snr_to_sigma, transmit_awgn
from codes.code_model import CheckRow, ParityCheckCode, enumerate_codewords, random_regular_ldpc
from decoders.adaptive_lp import decode_adaptive, parity_audit, verify_pseudocodeword_integrality
from decoders.ml_oracle import is_ml_certificate_consistent, ml_decode_bruteforce
from decoders.rpc_cutting import (
    RpcBudget,
    clusters_without_cycle,
    decode_with_rpc,
    fractional_subgraph,
    is_fractional_cycle,
    random_cycle_search,
    try_rpc_cut,
)
from solvers.cut_search import find_cut_for_check
from utils.decoding_types import DecodeStatus

# Two checks sharing variables 1 and 2. The adaptive decoder stops at the
# fractional vertex (1, 1/2, 1/2, 0) for this cost vector, the sum of both rows
# cuts it off.
SQUARE = ParityCheckCode(n=4, rows=((0, 1, 2), (1, 2, 3)))
SQUARE_GAMMA = np.array([-1.0, 0.6, 0.6, 0.8])
SQUARE_VERTEX = np.array([1.0, 0.5, 0.5, 0.0])


def test_fractional_subgraph_of_square():
    f = fractional_subgraph(SQUARE, SQUARE_VERTEX)
    assert f.phi == {1, 2}
    assert f.checks == {0, 1}
    assert f.edges == [(1, 0), (1, 1), (2, 0), (2, 1)]
    assert len(f.clusters) == 1
    assert not f.is_empty()


def test_integral_point_has_empty_subgraph():
    f = fractional_subgraph(SQUARE, np.array([1.0, 1.0 - 1e-9, 0.0, 1.0]))
    assert f.is_empty()
    assert f.graph.number_of_edges() == 0


@pytest.mark.parametrize("seed", range(10))
def test_walk_closes_the_square(seed):
    f = fractional_subgraph(SQUARE, SQUARE_VERTEX)
    checks = random_cycle_search(f, np.random.default_rng(seed))
    assert checks == {0, 1}
    assert is_fractional_cycle(f, checks)
    assert clusters_without_cycle(f) == []


def test_walk_on_a_tree_finds_nothing():
    f = fractional_subgraph(SQUARE, np.array([0.5, 0.0, 0.0, 0.0]))
    assert f.phi == {0}
    assert random_cycle_search(f, np.random.default_rng(0)) is None
    assert len(clusters_without_cycle(f)) == 1


def test_is_fractional_cycle_rejects_unrelated_checks():
    f = fractional_subgraph(SQUARE, SQUARE_VERTEX)
    assert not is_fractional_cycle(f, {0})
    assert not is_fractional_cycle(f, {0, 5})


@pytest.mark.parametrize("seed", range(8))
def test_walk_returns_cycles_of_the_subgraph(seed):
    code = random_regular_ldpc(40, 3, 6, seed=seed)
    rng = np.random.default_rng(seed)
    x = np.where(rng.random(40) < 0.6, 0.5, 0.0)
    f = fractional_subgraph(code, x)
    for _ in range(5):
        if (checks := random_cycle_search(f, rng)) is None:
            break
        assert checks <= f.checks
        assert is_fractional_cycle(f, checks)


def test_walks_on_a_multi_cycle_subgraph_return_cycles():
    code = random_regular_ldpc(24, 3, 4, seed=12)
    x = np.where(np.arange(24) % 3 == 0, 0.0, 0.5)
    f = fractional_subgraph(code, x)
    assert len(f.phi) == 16
    rng = np.random.default_rng(12)
    closed = set()
    for _ in range(1000):
        checks = random_cycle_search(f, rng)
        assert checks is not None
        assert is_fractional_cycle(f, checks)
        closed.add(checks)
    assert len(closed) > 1


def test_adaptive_pseudocodewords_have_no_tree_clusters():
    code = random_regular_ldpc(30, 3, 6, seed=2024)
    sigma = snr_to_sigma(-1.0)
    pseudocodewords = 0
    for block in range(60):
        gamma = llr_awgn(transmit_awgn(np.zeros(30, dtype=np.uint8), sigma, block_rng(13, block)), sigma)
        outcome = decode_adaptive(code, gamma)
        if outcome.status is not DecodeStatus.PSEUDOCODEWORD:
            continue
        pseudocodewords += 1
        f = fractional_subgraph(code, outcome.x, outcome.epsilon_int)
        assert f.clusters
        assert clusters_without_cycle(f) == []
    assert pseudocodewords > 0


def satisfied_pair(rng: np.random.Generator) -> tuple[ParityCheckCode, np.ndarray]:
    """Two overlapping checks and a point that violates neither of them."""
    n = 12
    shared = int(rng.integers(1, 4))
    first = rng.choice(n, size=int(rng.integers(3, 7)), replace=False)
    rest = np.setdiff1d(np.arange(n), first)
    second = np.concatenate(
        [
            rng.choice(first, size=shared, replace=False),
            rng.choice(rest, size=int(rng.integers(1, 4)), replace=False),
        ]
    )
    code = ParityCheckCode(n=n, rows=(tuple(sorted(first.tolist())), tuple(sorted(second.tolist()))))
    common = set(first.tolist()) & set(second.tolist())
    while True:
        x = rng.integers(0, 2, size=n).astype(np.float64)
        fractional = [
            i for i in range(n) if rng.random() < (0.8 if i in common else 0.2)
        ]
        x[fractional] = rng.uniform(0.01, 0.99, size=len(fractional))
        if all(find_cut_for_check(x, row) is None for row in code.rows):
            return code, x


def test_redundant_cuts_need_two_shared_fractional_variables():
    rng = np.random.default_rng(2)
    cuts = 0
    for _ in range(10_000):
        code, x = satisfied_pair(rng)
        if try_rpc_cut(code, x, {0, 1}) is None:
            continue
        cuts += 1
        phi = fractional_subgraph(code, x).phi
        assert len(set(code.rows[0]) & set(code.rows[1]) & phi) >= 2
    assert cuts > 0


def test_rpc_cut_at_square_vertex():
    cut = try_rpc_cut(SQUARE, SQUARE_VERTEX, {0, 1})
    assert cut is not None
    assert cut.check == CheckRow(support=(0, 3), origin=frozenset({0, 1}))
    assert cut.subset_v == (0,)
    assert cut.violation == pytest.approx(1.0)


def test_satisfied_redundant_row_gives_no_cut():
    assert try_rpc_cut(SQUARE, np.array([1.0, 1.0, 0.0, 1.0]), {0, 1}) is None


def test_rpc_cuts_keep_every_codeword():
    code = random_regular_ldpc(16, 3, 4, seed=8)
    codewords = enumerate_codewords(code).astype(np.float64)
    rng = np.random.default_rng(8)
    found = 0
    for _ in range(200):
        checks = set(rng.choice(code.m, size=int(rng.integers(2, 5)), replace=False).tolist())
        cut = try_rpc_cut(code, rng.random(code.n), checks)
        if cut is None:
            continue
        found += 1
        constraint = cut.to_constraint()
        assert all(constraint.lhs(c) <= constraint.rhs + 1e-12 for c in codewords)
    assert found > 0


# region decode_with_rpc
def test_adaptive_decoder_stops_at_square_vertex():
    outcome = decode_adaptive(SQUARE, SQUARE_GAMMA)
    assert outcome.status is DecodeStatus.PSEUDOCODEWORD
    assert np.allclose(outcome.x, SQUARE_VERTEX)
    assert outcome.objective_value == pytest.approx(-0.4)
    assert verify_pseudocodeword_integrality(outcome)


def test_rpc_recovers_the_ml_codeword():
    outcome = decode_with_rpc(SQUARE, SQUARE_GAMMA, rng=np.random.default_rng(1))
    assert outcome.status is DecodeStatus.ML_CODEWORD
    assert outcome.x.tolist() == [0.0, 0.0, 0.0, 0.0]
    assert outcome.rpc_cuts_added == 1
    assert outcome.rpc_cycle_trials == 1
    ml = ml_decode_bruteforce(SQUARE, SQUARE_GAMMA)
    assert ml.codeword.tolist() == [0, 0, 0, 0]
    assert is_ml_certificate_consistent(SQUARE, SQUARE_GAMMA, outcome)


def test_resolve_cap_stops_rpc():
    outcome = decode_with_rpc(
        SQUARE, SQUARE_GAMMA, budget=RpcBudget(lp_resolve_cap=1), rng=np.random.default_rng(1)
    )
    assert outcome.status is DecodeStatus.LIMIT_EXCEEDED
    assert outcome.rpc_cuts_added == 0


@pytest.mark.parametrize("block", range(30))
def test_resolve_cap_covers_every_resolve(block):
    code = random_regular_ldpc(32, 3, 4, seed=11)
    sigma = snr_to_sigma(1.0)
    gamma = llr_awgn(transmit_awgn(np.zeros(32, dtype=np.uint8), sigma, block_rng(12, block)), sigma)
    adaptive = decode_adaptive(code, gamma)
    for cap in sorted({1, adaptive.lp_resolves + 1, adaptive.lp_resolves + 3}):
        budget = RpcBudget(lp_resolve_cap=cap)
        outcome = decode_with_rpc(code, gamma, budget=budget, rng=np.random.default_rng([block, 1]))
        assert outcome.lp_resolves <= cap
        if adaptive.lp_resolves > cap:
            assert outcome.status is DecodeStatus.LIMIT_EXCEEDED
            assert outcome.rpc_cuts_added == 0


def test_deadline_stops_the_adaptive_phase():
    outcome = decode_with_rpc(
        SQUARE, SQUARE_GAMMA, budget=RpcBudget(t_max_ms=1e-6), rng=np.random.default_rng(1)
    )
    assert outcome.status is DecodeStatus.LIMIT_EXCEEDED
    assert outcome.iterations == 1
    assert outcome.lp_resolves == 0


def test_generator_is_required():
    with pytest.raises(TypeError):
        decode_with_rpc(SQUARE, SQUARE_GAMMA)


def test_integral_adaptive_result_is_unchanged():
    code = random_regular_ldpc(20, 3, 4, seed=6)
    gamma = np.full(code.n, 1.5)
    outcome = decode_with_rpc(code, gamma, rng=np.random.default_rng(0))
    assert outcome.status is DecodeStatus.ML_CODEWORD
    assert outcome.rpc_cycle_trials == 0
    assert outcome.iterations == 1


def test_same_seed_same_decode():
    code = random_regular_ldpc(30, 3, 6, seed=3)
    sigma = snr_to_sigma(-1.0)
    for block in range(5):
        gamma = llr_awgn(transmit_awgn(np.zeros(30, dtype=np.uint8), sigma, block_rng(3, block)), sigma)
        first = decode_with_rpc(code, gamma, rng=np.random.default_rng([block, 1]))
        second = decode_with_rpc(code, gamma, rng=np.random.default_rng([block, 1]))
        assert np.array_equal(first.x, second.x)
        assert first.rpc_cycle_trials == second.rpc_cycle_trials


@pytest.mark.parametrize("block", range(25))
def test_rpc_only_tightens(block):
    code = random_regular_ldpc(20, 3, 4, seed=6)
    sigma = snr_to_sigma(1.0)
    gamma = llr_awgn(transmit_awgn(np.zeros(20, dtype=np.uint8), sigma, block_rng(10, block)), sigma)
    adaptive = decode_adaptive(code, gamma)
    rpc = decode_with_rpc(code, gamma, rng=np.random.default_rng([block, 1]))
    assert rpc.objective_trace[-1] >= adaptive.objective_trace[-1] - 1e-8
    assert is_ml_certificate_consistent(code, gamma, rpc)
    if rpc.status is DecodeStatus.PSEUDOCODEWORD and rpc.rpc_cuts_added == 0:
        assert verify_pseudocodeword_integrality(rpc)
    assert parity_audit(code, rpc) == []


# endregion decode_with_rpc
