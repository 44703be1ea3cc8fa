import numpy as np
import pytest

from codes.code_model import CheckRow, ParityCheckCode, random_regular_ldpc
from solvers.cut_search import (
    EPSILON_CUT,
    Cut,
    CutSearchDiagnostics,
    InvalidSubsetError,
    ParityProvenance,
    all_parity_constraints,
    constraint_from_subset,
    find_all_cuts,
    find_cut_for_check,
)
from tests.oracles import exhaustive_cuts


# region constraint_from_subset
def test_single_element_subset():
    c = constraint_from_subset((0, 1, 2), (0,))
    assert c.terms == ((0, 1.0), (1, -1.0), (2, -1.0))
    assert c.rhs == 0.0


def test_full_neighborhood_subset():
    c = constraint_from_subset((0, 1, 2), (0, 1, 2), check=4)
    assert c.terms == ((0, 1.0), (1, 1.0), (2, 1.0))
    assert c.rhs == 2.0
    assert c.provenance == ParityProvenance(4, (0, 1, 2))


@pytest.mark.parametrize(
    "neighborhood,subset",
    [((0, 1, 2, 3), (0, 1)), ((0, 1, 2), (0, 5, 1)), ((0, 1, 2), (1, 1, 2))],
)
def test_invalid_subsets(neighborhood, subset):
    with pytest.raises(InvalidSubsetError):
        constraint_from_subset(neighborhood, subset)


@pytest.mark.parametrize("degree,count", [(3, 4), (6, 32), (2, 2)])
def test_all_parity_constraints_count(degree, count):
    constraints = all_parity_constraints(tuple(range(degree)))
    assert len(constraints) == count
    assert len({c.terms for c in constraints}) == count


def test_codewords_satisfy_every_parity_constraint():
    neighborhood = (0, 1, 2, 3, 4)
    constraints = all_parity_constraints(neighborhood)
    for bits in range(32):
        x = np.array([(bits >> i) & 1 for i in range(5)], dtype=float)
        if x.sum() % 2 == 0:
            assert all(c.lhs(x) <= c.rhs for c in constraints)
        else:
            assert any(c.lhs(x) > c.rhs for c in constraints)


# endregion constraint_from_subset


# region find_cut_for_check
def test_hard_decision_with_odd_parity_is_cut():
    cut = find_cut_for_check(np.array([1.0, 0.0, 0.0]), (0, 1, 2))
    assert cut is not None
    assert cut.subset_v == (0,)
    assert cut.violation == pytest.approx(1.0)


def test_documented_fractional_cut():
    x = np.array([0.9, 0.8, 0.6, 0.1])
    cut = find_cut_for_check(x, (0, 1, 2, 3), check=7)
    assert cut.subset_v == (0, 1, 2)
    assert cut.violation == pytest.approx(0.2)
    assert cut.check == 7
    assert cut.to_constraint().violation(x) == pytest.approx(0.2)


def test_center_point_is_not_cut():
    assert find_cut_for_check(np.array([0.5, 0.5, 0.5]), (0, 1, 2)) is None


def test_subset_grows_in_pairs():
    x = np.array([0.2, 0.9, 0.9, 0.9, 0.0])
    cut = find_cut_for_check(x, (0, 1, 2, 3, 4))
    assert cut.subset_v == (1, 2, 3)
    x = np.array([1.0, 1.0, 0.0])
    # 1 - 1 - 0 = 0 is not a violation, both singletons are tight.
    assert find_cut_for_check(x, (0, 1, 2)) is None
    x = np.array([1.0, 1.0, 1.0, 0.0])
    assert find_cut_for_check(x, (0, 1, 2, 3)).subset_v == (0, 1, 2)


def test_out_of_range_values_are_clamped_and_counted():
    diagnostics = CutSearchDiagnostics()
    cut = find_cut_for_check(np.array([1.5, -0.2, 0.0]), (0, 1, 2), diagnostics=diagnostics)
    assert diagnostics.clamped == 2
    assert diagnostics.checks_searched == 1
    assert cut.violation == pytest.approx(1.0)


def test_violation_threshold():
    # 1 - (1 - 1e-10) = 1e-10 is below the cut threshold.
    x = np.array([1.0, 1.0 - 1e-10, 0.0])
    assert find_cut_for_check(x, (0, 1, 2)) is None
    assert find_cut_for_check(x, (0, 1, 2), epsilon_cut=1e-12) is not None


def test_redundant_row_as_check():
    row = CheckRow(support=(0, 3), origin=frozenset({0, 1}))
    cut = find_cut_for_check(np.array([0.9, 0.5, 0.5, 0.1]), row.support, check=row)
    assert cut.check == row
    assert cut.to_constraint().provenance.check == row


@pytest.mark.parametrize("degree", range(3, 16))
def test_matches_exhaustive_subset_search(degree):
    rng = np.random.default_rng(degree)
    neighborhood = tuple(sorted(rng.choice(40, size=degree, replace=False).tolist()))
    trials = 400 if degree <= 10 else 60
    for _ in range(trials):
        x = np.zeros(40)
        # Mix of uniform and near-integral points so cuts are common.
        values = rng.random(degree)
        if rng.random() < 0.5:
            values = np.clip(np.round(values) + rng.normal(scale=0.2, size=degree), 0, 1)
        x[list(neighborhood)] = values
        expected = exhaustive_cuts(x, neighborhood)
        assert len(expected) <= 1
        cut = find_cut_for_check(x, neighborhood)
        if not expected:
            assert cut is None
            continue
        assert cut is not None
        assert cut.subset_v == expected[0][0]
        assert cut.violation == pytest.approx(expected[0][1], abs=1e-12)
        # The cut's V is a prefix of the neighborhood sorted by decreasing x.
        ranked = sorted(neighborhood, key=lambda i: (-x[i], i))
        assert set(cut.subset_v) == set(ranked[: len(cut.subset_v)])
        # Every member outweighs everything outside V.
        outside = sum(x[i] for i in neighborhood if i not in cut.subset_v)
        assert all(x[i] > outside - 1e-12 for i in cut.subset_v)


def test_small_perturbations_keep_clear_verdicts():
    rng = np.random.default_rng(9)
    neighborhood = tuple(range(8))
    bound = EPSILON_CUT / (2 * len(neighborhood))
    for _ in range(2000):
        x = rng.random(8)
        cut = find_cut_for_check(x, neighborhood)
        if cut is None or cut.violation <= 2 * EPSILON_CUT:
            continue
        shaken = np.clip(x + rng.uniform(-bound, bound, size=8) * 0.99, 0, 1)
        again = find_cut_for_check(shaken, neighborhood)
        assert again is not None and again.subset_v == cut.subset_v


# endregion find_cut_for_check


# region find_all_cuts
def test_codeword_has_no_cuts():
    code = ParityCheckCode(n=4, rows=((0, 1, 2), (1, 2, 3)))
    assert find_all_cuts(code, np.array([1.0, 1.0, 0.0, 1.0])) == []
    assert find_all_cuts(code, np.zeros(4)) == []


def test_single_check_code():
    code = ParityCheckCode(n=3, rows=((0, 1, 2),))
    cuts = find_all_cuts(code, np.array([1.0, 0.0, 0.0]))
    assert cuts == [Cut(check=0, neighborhood=(0, 1, 2), subset_v=(0,), violation=1.0)]


def test_random_points_on_regular_code():
    code = random_regular_ldpc(30, 3, 6, seed=4)
    rng = np.random.default_rng(4)
    for _ in range(300):
        x = rng.random(30)
        cuts = find_all_cuts(code, x)
        assert [c.check for c in cuts] == sorted(c.check for c in cuts)
        expected = {
            (j, found[0][0])
            for j, row in enumerate(code.rows)
            if (found := exhaustive_cuts(x, row))
        }
        assert {(c.check, c.subset_v) for c in cuts} == expected


# endregion find_all_cuts
