import numpy as np
import pandas as pd
import pytest

from strategic_delta.baselines import closed_form_baseline
from strategic_delta.exceptions import (
    DegenerateVariance,
    FewerThanThreeGames,
    InvalidInputs,
    MissingCondition,
    TooFew,
)
from strategic_delta.moderator import (
    Verdict,
    cohens_d,
    empirical_power,
    individuation_gradient_test,
    pooled_effect,
    power_n_per_arm,
    report_to_dict,
    report_to_markdown,
)
from strategic_delta.residuals import delta_series, deltas_to_frame


def test_cohens_d_example():
    report = cohens_d([0.1, 0.6, 1.1], [-0.2, 0.3, 0.8], n_bootstrap=200)
    assert report.d == pytest.approx(0.6)
    assert report.verdict is Verdict.DIRECTION_ONLY
    assert report.hedges_g < report.d
    assert report.ci95[0] < report.ci95[1]


@pytest.mark.parametrize(
    "shift, verdict",
    [(0.0, Verdict.NULL), (-0.5, Verdict.REVERSED), (1.0, Verdict.SUPPORTS)],
)
def test_cohens_d_verdicts(shift, verdict):
    base = np.array([0.1, 0.4, 0.2, 0.5, 0.3])
    assert cohens_d(base + shift, base, n_bootstrap=100).verdict is verdict


def test_cohens_d_bootstrap_is_seeded():
    a, b = [0.3, 0.5, 0.9, 0.4], [0.1, 0.2, 0.4, 0.3]
    assert cohens_d(a, b, seed=5).ci95 == cohens_d(a, b, seed=5).ci95


def test_cohens_d_errors():
    with pytest.raises(TooFew):
        cohens_d([1.0], [1.0, 2.0])
    with pytest.raises(DegenerateVariance):
        cohens_d([1.0, 1.0], [2.0, 2.0])


def test_empirical_power_near_textbook_value():
    assert empirical_power(64, 0.5, n_sim=4000) == pytest.approx(0.80, abs=0.03)


def test_power_n_per_arm():
    n = power_n_per_arm(0.5, 0.05, 0.8)
    assert 62 <= n <= 66
    assert empirical_power(n, 0.5, 0.05) >= 0.79
    assert power_n_per_arm(0.8, 0.05, 0.8) < n


@pytest.mark.slow
def test_cohens_d_recovers_a_within_subject_effect():
    # each subject is seen under both conditions; subject effects carry half the variance
    hits = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        subject = rng.normal(0.0, np.sqrt(0.5), size=200)
        named = 0.6 + subject + rng.normal(0.0, np.sqrt(0.5), size=200)
        aggregate = subject + rng.normal(0.0, np.sqrt(0.5), size=200)
        hits += abs(cohens_d(named, aggregate, n_bootstrap=20, seed=seed).d - 0.6) <= 0.15
    assert hits >= 180


@pytest.mark.parametrize("kwargs", [{"d": 0}, {"d": 0.5, "alpha": 1.0}, {"d": 0.5, "power": 0}])
def test_power_n_per_arm_rejects_inputs(kwargs):
    with pytest.raises(InvalidInputs):
        power_n_per_arm(**kwargs)


def test_pooled_effect():
    reports = [cohens_d([0.1, 0.6, 1.1], [-0.2, 0.3, 0.8], n_bootstrap=50) for _ in range(3)]
    pooled, se = pooled_effect(reports)
    assert pooled == pytest.approx(0.6)
    assert se > 0
    with pytest.raises(InvalidInputs):
        pooled_effect([])


def _frame(named_shift):
    rng = np.random.default_rng(1)
    rows = []
    for game_id in ("g1", "g2", "g3"):
        for individuation, shift in (("Named", named_shift[game_id]), ("Aggregate", 0.0)):
            for i, value in enumerate(rng.normal(0.3 + shift, 0.05, size=40)):
                rows.append(
                    {
                        "game_id": game_id,
                        "subject_id": f"p{i % 8}",
                        "individuation": individuation,
                        "delta": value,
                    }
                )
    return pd.DataFrame(rows)


def test_gradient_supports_with_trend():
    frame = _frame({"g1": 0.05, "g2": 0.1, "g3": 0.2})
    report = individuation_gradient_test(frame, ordering=["g1", "g2", "g3"], n_bootstrap=200)
    assert report.verdict is Verdict.SUPPORTS
    assert all(r.d > 0 for r in report.per_game)
    assert report.trend_tau == pytest.approx(1.0)
    assert report.monotone
    assert "d_z" in report.per_game[0].details
    data = report_to_dict(report)
    assert [g["game_id"] for g in data["games"]] == ["g1", "g2", "g3"]
    assert "Kendall tau" in report_to_markdown(report)


def test_gradient_reversed():
    frame = _frame({"g1": -0.2, "g2": -0.2, "g3": -0.2})
    assert individuation_gradient_test(frame, n_bootstrap=100).verdict is Verdict.REVERSED


def test_gradient_errors():
    frame = _frame({"g1": 0.1, "g2": 0.1, "g3": 0.1})
    with pytest.raises(FewerThanThreeGames):
        individuation_gradient_test(frame[frame["game_id"] != "g3"])
    missing = frame[~((frame["game_id"] == "g2") & (frame["individuation"] == "Aggregate"))]
    with pytest.raises(MissingCondition) as err:
        individuation_gradient_test(missing)
    assert err.value.game_id == "g2"


def test_bounded_human_agents_react_to_names(bounded_human_dataset):
    dataset = bounded_human_dataset
    baselines = {
        (game.id, role): closed_form_baseline(game, role)
        for game in dataset.games.values()
        for role in game.acting_roles
    }
    frame = deltas_to_frame(delta_series(dataset.records, dataset.games, baselines))
    report = individuation_gradient_test(frame, ordering=["dictator", "ultimatum", "trust"], n_bootstrap=200)
    assert report.verdict is Verdict.SUPPORTS
    assert report.ordering == ["dictator", "ultimatum", "trust"]
