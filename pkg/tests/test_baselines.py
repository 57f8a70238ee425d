from itertools import combinations

import numpy as np
import pytest

from strategic_delta.baselines import (
    NASH,
    Baseline,
    BaselineKind,
    Benchmark,
    BenchmarkKind,
    baseline_to_dict,
    closed_form_baseline,
    cognitive_hierarchy_action,
    cooperation_probability,
    fairness_rejection_threshold,
    grid_best_response,
    level_k_action,
    literal_fairness_utility,
    logit_qre,
    logit_response,
    max_deviation_gain,
    risk_averse_bid,
    select_baseline,
    solve_bimatrix_nash,
    stage_payoff,
)
from strategic_delta.exceptions import (
    InvalidParams,
    InvalidRho,
    Unsupported,
    WrongFamily,
)
from strategic_delta.game_model import DEFECT, generate_novel_game, make_game


def _bimatrix(row, col):
    return make_game("GeneratedBimatrix", {"row_payoffs": row, "col_payoffs": col}, "custom")


@pytest.mark.parametrize(
    "game_id, role, expected",
    [
        ("dictator", 0, 0.0),
        ("ultimatum", 0, 1.0),
        ("ultimatum", 1, 0.0),
        ("trust", 0, 0.0),
        ("trust", 1, 0.0),
        ("public-goods", 0, 0.0),
        ("pbeauty", 0, 0.0),
        ("first-price", 0, 40.0),
        ("second-price", 1, 73.0),
        ("tullock", 0, 25.0),
    ],
)
def test_closed_form_points(games, game_id, role, expected):
    baseline = closed_form_baseline(games[game_id], role)
    assert baseline.kind is BaselineKind.POINT
    assert baseline.point == pytest.approx(expected)


def test_closed_form_pd_defects(pd_game):
    assert closed_form_baseline(pd_game, 0).point == DEFECT


def test_closed_form_all_pay_is_uniform(games):
    baseline = closed_form_baseline(games["all-pay"], 0, grid_points=11)
    assert baseline.kind is BaselineKind.MIXED
    assert baseline.support[0] == 0.0 and baseline.support[-1] == 100.0
    assert baseline.mean() == pytest.approx(50.0)
    assert baseline.normalized(games["all-pay"]) == pytest.approx(0.5)


def test_closed_form_unsupported(games):
    with pytest.raises(Unsupported):
        closed_form_baseline(games["dictator"], 1)
    with pytest.raises(Unsupported):
        closed_form_baseline(make_game("TullockContest", {"V": 100, "r": 2}), 0)
    with pytest.raises(Unsupported):
        closed_form_baseline(generate_novel_game(1, (2, 2)), 0)


def test_stage_payoff(pd_game, games):
    assert stage_payoff(pd_game, 0, "cooperate", "defect") == 0.0
    assert stage_payoff(pd_game, 1, "defect", "cooperate") == 5.0
    assert stage_payoff(pd_game, 0, "cooperate", "cooperate", stake_scale=2) == 6.0
    assert stage_payoff(games["ultimatum"], 0, 40, 30) == 60.0
    assert stage_payoff(games["ultimatum"], 0, 20, 30) == 0.0


def test_level_k_pbeauty(games):
    game = games["pbeauty"]
    assert level_k_action(game, 0, 0) == pytest.approx(50.0)
    assert level_k_action(game, 0, 2) == pytest.approx(100 / 2 * (2 / 3) ** 2)


def test_level_k_ultimatum_proposer_meets_midpoint(ultimatum):
    assert level_k_action(ultimatum, 0, 1) == pytest.approx(50.0)


def test_level_k_rejects_trustee(games):
    with pytest.raises(Unsupported):
        level_k_action(games["trust"], 1, 1)
    with pytest.raises(InvalidParams):
        level_k_action(games["pbeauty"], 0, -1)


def test_cognitive_hierarchy_pbeauty(games):
    value = cognitive_hierarchy_action(games["pbeauty"], 0, 2, tau=1.5)
    assert value == pytest.approx(26.667, abs=1e-3)


def test_cognitive_hierarchy_needs_positive_tau(games):
    with pytest.raises(InvalidParams):
        cognitive_hierarchy_action(games["pbeauty"], 0, 2, tau=0)


def test_pd_support_enumeration(pd_game):
    found = solve_bimatrix_nash(pd_game)
    assert len(found) == 1
    row, col = found[0]
    assert row.point == DEFECT and col.point == DEFECT
    assert not found.degenerate


def test_matching_pennies_is_mixed():
    game = _bimatrix([[1, -1], [-1, 1]], [[-1, 1], [1, -1]])
    found = solve_bimatrix_nash(game)
    assert len(found) == 1
    for baseline in found[0]:
        assert baseline.kind is BaselineKind.MIXED
        assert baseline.weights == pytest.approx((0.5, 0.5))


def test_degenerate_game_is_reported():
    game = _bimatrix([[0, 0], [0, 0]], [[0, 0], [0, 0]])
    found = solve_bimatrix_nash(game)
    assert found.degenerate
    assert len(found) >= 4


def test_coordination_game_equilibria():
    game = _bimatrix([[2, 0], [0, 1]], [[2, 0], [0, 1]])
    found = solve_bimatrix_nash(game)
    assert len(found) == 3
    mixed = [p for p in found if p[0].kind is BaselineKind.MIXED]
    assert mixed[0][0].weights == pytest.approx((1 / 3, 2 / 3))
    row, col = game.payoff_matrices()
    for profile in found:
        x = np.array([profile[0].probability(a) for a in game.action_space(0).labels])
        y = np.array([profile[1].probability(a) for a in game.action_space(1).labels])
        assert max_deviation_gain(row, col, x, y) <= 1e-8


def test_solve_bimatrix_wrong_family(games):
    with pytest.raises(WrongFamily):
        solve_bimatrix_nash(games["ultimatum"])


def test_logit_qre_zero_precision_is_uniform(pd_game):
    profile = logit_qre(pd_game, 0.0)
    assert set(profile) == {0, 1}
    assert profile[0].weights == pytest.approx((0.5, 0.5))


def test_logit_qre_is_fixed_point(pd_game):
    profile = logit_qre(pd_game, 1.0)
    response = logit_response(pd_game, profile, 1.0)
    assert response[0] == pytest.approx(np.asarray(profile[0].weights), abs=1e-8)
    assert 0 < cooperation_probability(profile[0]) < 0.5


def test_logit_qre_unsupported_and_invalid(games, pd_game):
    with pytest.raises(Unsupported):
        logit_qre(games["pbeauty"], 1.0)
    with pytest.raises(InvalidParams):
        logit_qre(pd_game, -1.0)


def test_fairness_threshold():
    assert fairness_rejection_threshold(100, 0.75) == pytest.approx(30.0)
    assert fairness_rejection_threshold(100, 0) == 0.0


def test_risk_averse_bid():
    assert risk_averse_bid(90, 2, 1.0) == pytest.approx(45.0)
    assert risk_averse_bid(90, 2, 0.5) > 45.0
    with pytest.raises(InvalidRho):
        risk_averse_bid(90, 2, 0)
    with pytest.raises(InvalidRho):
        risk_averse_bid(90, 2, 1.5)


@pytest.mark.parametrize(
    "name, kwargs, kind",
    [
        ("nash", {}, BenchmarkKind.NASH),
        ("spe", {}, BenchmarkKind.SPE),
        ("level-k", {"k": 2}, BenchmarkKind.LEVEL_K),
        ("ch", {"k": 2}, BenchmarkKind.COGNITIVE_HIERARCHY),
        ("qre", {"lam": 0.5}, BenchmarkKind.LOGIT_QRE),
    ],
)
def test_benchmark_parse(name, kwargs, kind):
    assert Benchmark.parse(name, **kwargs).kind is kind


def test_benchmark_parse_requires_parameters():
    with pytest.raises(InvalidParams):
        Benchmark.parse("level-k")
    with pytest.raises(InvalidParams):
        Benchmark.parse("minimax")


def test_select_baseline(games):
    level2 = select_baseline(games["pbeauty"], 0, Benchmark.parse("level-k", k=2))
    assert level2.point == pytest.approx(22.222, abs=1e-3)
    assert str(level2.benchmark) == "LevelK(2)"
    generated = generate_novel_game(3, (2, 2))
    assert select_baseline(generated, 1, NASH).role == 1


def test_baseline_validation_and_dict(games):
    with pytest.raises(InvalidParams):
        Baseline("g", 0, BaselineKind.MIXED, NASH, support=(0.0, 1.0), weights=(0.3, 0.3))
    data = baseline_to_dict(closed_form_baseline(games["all-pay"], 0, grid_points=5))
    assert data["kind"] == "Mixed"
    assert data["mean"] == pytest.approx(50.0)


def test_grid_oracle_confirms_tullock(games):
    game = games["tullock"]
    equilibrium = closed_form_baseline(game, 0).point
    assert equilibrium == pytest.approx(25.0)
    assert grid_best_response(game, 0, equilibrium) == pytest.approx(25.0, abs=1e-6)


def test_grid_oracle_on_discrete_and_mixed(games, pd_game):
    assert grid_best_response(pd_game, 0, "cooperate") == DEFECT
    assert grid_best_response(pd_game, 1, [("cooperate", 0.5), ("defect", 0.5)]) == DEFECT
    with pytest.raises(Unsupported):
        grid_best_response(games["pbeauty"], 0, 30.0)


def test_literal_fairness_utility():
    assert literal_fairness_utility(50, 100, 0.75) == pytest.approx(50.0)
    assert literal_fairness_utility(20, 100, 0.75) == pytest.approx(20.225)


def _unique_mix(matrix, rows, cols):
    sub = matrix[np.ix_(rows, cols)]
    k, l = sub.shape
    lhs = np.zeros((k + 1, l + 1))
    lhs[:k, :l] = sub
    lhs[:k, l] = -1.0
    lhs[k, :l] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    if np.linalg.matrix_rank(lhs) < l + 1:
        return None
    sol = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    if not np.allclose(lhs @ sol, rhs, atol=1e-9) or (sol[:l] < -1e-9).any():
        return None
    return np.clip(sol[:l], 0.0, None)


def _every_support_pair(row, col):
    m, n = row.shape
    row_sets = [c for size in range(1, m + 1) for c in combinations(range(m), size)]
    col_sets = [c for size in range(1, n + 1) for c in combinations(range(n), size)]
    out = set()
    for rows in row_sets:
        for cols in col_sets:
            y = _unique_mix(row, rows, cols)
            x = _unique_mix(col.T, cols, rows)
            if x is None or y is None:
                continue
            full_x, full_y = np.zeros(m), np.zeros(n)
            full_x[list(rows)] = x / x.sum()
            full_y[list(cols)] = y / y.sum()
            if max_deviation_gain(row, col, full_x, full_y) <= 1e-8:
                out.add((tuple(np.round(full_x, 6)), tuple(np.round(full_y, 6))))
    return out


def _as_vectors(game, profile):
    x = [profile[0].probability(a) for a in game.action_space(0).labels]
    y = [profile[1].probability(a) for a in game.action_space(1).labels]
    return tuple(np.round(x, 6)), tuple(np.round(y, 6))


@pytest.mark.parametrize("seed", [2, 8, 59, 147])
def test_degenerate_7x7_matches_full_enumeration(seed):
    game = generate_novel_game(seed, (7, 7))
    row, col = game.payoff_matrices()
    found = solve_bimatrix_nash(game)
    solved = {_as_vectors(game, p) for p in found}
    assert _every_support_pair(row, col) <= solved
    for x, y in solved:
        assert max_deviation_gain(row, col, np.array(x), np.array(y)) <= 1e-5


@pytest.mark.slow
def test_10x10_generated_game_solves():
    game = generate_novel_game(3, (10, 10))
    row, col = game.payoff_matrices()
    found = solve_bimatrix_nash(game)
    assert len(found) >= 1
    for profile in found:
        x, y = _as_vectors(game, profile)
        assert max_deviation_gain(row, col, np.array(x), np.array(y)) <= 1e-5
