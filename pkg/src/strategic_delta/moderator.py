"""
Opponent-individuation moderator: does |delta| grow when the opponent is named?

Effect sizes are Cohen's d on residual magnitudes, Named minus Aggregate,
with a medium effect (d >= 0.5) as the bar for support.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import stats

from . import DEFAULT_BOOTSTRAP, DEFAULT_SEED, LOG, SIGNIFICANCE_LEVEL
from .exceptions import (
    DegenerateVariance,
    FewerThanThreeGames,
    InvalidInputs,
    MissingCondition,
    TooFew,
)
from .game_model import Individuation
from .utils import resample_chunks, substream

__all__ = [
    "EffectSizeReport",
    "GradientReport",
    "Verdict",
    "cohens_d",
    "empirical_power",
    "individuation_gradient_test",
    "pooled_effect",
    "power_n_per_arm",
    "report_to_dict",
    "report_to_markdown",
]

SUPPORT_THRESHOLD = 0.5
DEFAULT_POWER_SIMULATIONS = 10_000
POWER_SLACK = 0.01
MIN_GAMES = 3
ZERO = 1e-12


class Verdict(str, Enum):
    SUPPORTS = "Supports"
    DIRECTION_ONLY = "DirectionOnly"
    NULL = "Null"
    REVERSED = "Reversed"


def verdict_for(d) -> Verdict:
    if abs(d) < ZERO:
        return Verdict.NULL
    if d < 0:
        return Verdict.REVERSED
    if d >= SUPPORT_THRESHOLD:
        return Verdict.SUPPORTS
    return Verdict.DIRECTION_ONLY


@dataclass
class EffectSizeReport:
    d: float
    hedges_g: float
    ci95: tuple
    n_named: int
    n_aggregate: int
    verdict: Verdict
    game_id: str = None
    details: dict = field(default_factory=dict)


@dataclass
class GradientReport:
    per_game: list
    pooled_d: float
    pooled_se: float
    verdict: Verdict
    ordering: list = None
    trend_tau: float = None
    monotone: bool = None


def _pooled_sd(a, b):
    n1, n2 = len(a), len(b)
    var = ((n1 - 1) * np.var(a, ddof=1) + (n2 - 1) * np.var(b, ddof=1)) / (n1 + n2 - 2)
    return math.sqrt(var)


def _d_rows(a, b):
    """Row-wise Cohen's d for stacked resamples."""
    n1, n2 = a.shape[1], b.shape[1]
    var = ((n1 - 1) * a.var(axis=1, ddof=1) + (n2 - 1) * b.var(axis=1, ddof=1)) / (n1 + n2 - 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (a.mean(axis=1) - b.mean(axis=1)) / np.sqrt(var)


def cohens_d(group_a, group_b, n_bootstrap=DEFAULT_BOOTSTRAP, seed=DEFAULT_SEED, game_id=None) -> EffectSizeReport:
    """
    Cohen's d of ``group_a`` over ``group_b`` with a bootstrap 95% CI.

    :param group_a: |delta| values under Named conditions.
    :param group_b: |delta| values under Aggregate conditions.
    :raise TooFew: If a group has fewer than 2 values.
    :raise DegenerateVariance: If the pooled variance is zero.

    Example:
        >>> round(cohens_d([0.1, 0.6, 1.1], [-0.2, 0.3, 0.8]).d, 6)
        0.6
    """
    a = np.asarray(group_a, dtype=float)
    b = np.asarray(group_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise TooFew(len(a), len(b))
    sd = _pooled_sd(a, b)
    if sd == 0:
        raise DegenerateVariance("Both groups are constant")
    d = float((a.mean() - b.mean()) / sd)
    n1, n2 = len(a), len(b)
    g = d * (1 - 3 / (4 * (n1 + n2) - 9))

    def draw(rng, size):
        ra = a[rng.integers(0, n1, size=(size, n1))]
        rb = b[rng.integers(0, n2, size=(size, n2))]
        return _d_rows(ra, rb)

    boot = resample_chunks(n_bootstrap, seed, draw)
    boot = boot[np.isfinite(boot)]
    ci = (
        (float(np.percentile(boot, 2.5)), float(np.percentile(boot, 97.5)))
        if len(boot)
        else (math.nan, math.nan)
    )
    return EffectSizeReport(
        d=d,
        hedges_g=float(g),
        ci95=ci,
        n_named=n1,
        n_aggregate=n2,
        verdict=verdict_for(d),
        game_id=game_id,
    )


def empirical_power(n, d, alpha=SIGNIFICANCE_LEVEL, n_sim=DEFAULT_POWER_SIMULATIONS, seed=DEFAULT_SEED) -> float:
    """Monte Carlo rejection rate of a two-sided two-sample t-test at ``n`` per arm."""
    rng = substream(seed, int(n))
    noise_a = rng.standard_normal((n_sim, n))
    noise_b = rng.standard_normal((n_sim, n))
    p = stats.ttest_ind(noise_a + d, noise_b, axis=1).pvalue
    return float(np.mean(p < alpha))


def power_n_per_arm(
    d,
    alpha=SIGNIFICANCE_LEVEL,
    power=0.8,
    n_sim=DEFAULT_POWER_SIMULATIONS,
    seed=DEFAULT_SEED,
) -> int:
    """
    Smallest per-arm n giving the requested two-sample t-test power.

    Starts from the normal approximation ``2 (z_{1-alpha/2} + z_power)^2 / d^2``
    and moves up until the Monte Carlo power reaches ``power - 0.01``.

    :raise InvalidInputs: Unless d > 0 and alpha, power lie in (0, 1).
    """
    if not (d > 0 and 0 < alpha < 1 and 0 < power < 1):
        raise InvalidInputs(f"need d > 0 and 0 < alpha, power < 1; got d={d}, alpha={alpha}, power={power}")
    z = stats.norm.ppf(1 - alpha / 2) + stats.norm.ppf(power)
    n = max(2, math.ceil(2 * z**2 / d**2))
    while True:
        achieved = empirical_power(n, d, alpha, n_sim, seed)
        if achieved >= power - POWER_SLACK:
            LOG.info("n=%d per arm gives power %.4f at d=%g", n, achieved, d)
            return n
        n += 1


def _d_variance(d, n1, n2):
    return (n1 + n2) / (n1 * n2) + d**2 / (2 * (n1 + n2))


def pooled_effect(per_game):
    """
    Inverse-variance weighted mean of per-game d values.

    :return: ``(pooled_d, standard_error)``
    """
    if not per_game:
        raise InvalidInputs("No per-game effects to pool")
    weights = np.array([1 / _d_variance(r.d, r.n_named, r.n_aggregate) for r in per_game])
    ds = np.array([r.d for r in per_game])
    return float(np.dot(weights, ds) / weights.sum()), float(math.sqrt(1 / weights.sum()))


def _paired_dz(rows):
    """Within-subject d_z over subjects observed under both conditions."""
    means = rows.groupby(["subject_id", "individuation"])["magnitude"].mean().unstack()
    if Individuation.NAMED.value not in means or Individuation.AGGREGATE.value not in means:
        return None
    diff = (means[Individuation.NAMED.value] - means[Individuation.AGGREGATE.value]).dropna()
    if len(diff) < 2 or diff.std(ddof=1) == 0:
        return None
    return {"d_z": float(diff.mean() / diff.std(ddof=1)), "n_subjects": int(len(diff))}


def individuation_gradient_test(
    deltas,
    ordering=None,
    n_bootstrap=DEFAULT_BOOTSTRAP,
    seed=DEFAULT_SEED,
) -> GradientReport:
    """
    Per-game Named-vs-Aggregate effect on |delta| across at least three games.

    Overall verdict is Supports iff every game's d is positive and the
    pooled d is at least 0.5. When ``ordering`` lists game ids from least to
    most individuated, the Kendall trend of d along it is reported.

    :param deltas: Tidy residual table (see :func:`residuals.deltas_to_frame`).
    :raise FewerThanThreeGames: With fewer than 3 games.
    :raise MissingCondition: If a game lacks Named or Aggregate rows.
    """
    frame = deltas.assign(magnitude=deltas["delta"].abs())
    game_ids = list(dict.fromkeys(frame["game_id"]))
    if len(game_ids) < MIN_GAMES:
        raise FewerThanThreeGames(len(game_ids))

    per_game = []
    for i, game_id in enumerate(game_ids):
        rows = frame[frame["game_id"] == game_id]
        named = rows.loc[rows["individuation"] == Individuation.NAMED.value, "magnitude"]
        aggregate = rows.loc[rows["individuation"] == Individuation.AGGREGATE.value, "magnitude"]
        if named.empty:
            raise MissingCondition(game_id, Individuation.NAMED.value)
        if aggregate.empty:
            raise MissingCondition(game_id, Individuation.AGGREGATE.value)
        report = cohens_d(named, aggregate, n_bootstrap, seed + i, game_id=game_id)
        paired = _paired_dz(rows)
        if paired:
            report.details.update(paired)
        per_game.append(report)
        LOG.debug("Game %s: d=%.4f (%s)", game_id, report.d, report.verdict.value)

    pooled, se = pooled_effect(per_game)
    if all(r.d > 0 for r in per_game) and pooled >= SUPPORT_THRESHOLD:
        verdict = Verdict.SUPPORTS
    elif abs(pooled) < ZERO:
        verdict = Verdict.NULL
    elif pooled < 0:
        verdict = Verdict.REVERSED
    else:
        verdict = Verdict.DIRECTION_ONLY

    out = GradientReport(per_game=per_game, pooled_d=pooled, pooled_se=se, verdict=verdict)
    if ordering:
        by_id = {r.game_id: r.d for r in per_game}
        ds = [by_id[g] for g in ordering if g in by_id]
        out.ordering = [g for g in ordering if g in by_id]
        if len(ds) >= 2:
            out.trend_tau = float(stats.kendalltau(np.arange(len(ds)), ds).statistic)
            out.monotone = bool(np.all(np.diff(ds) >= 0))
    LOG.info("Individuation gradient: pooled d=%.4f, verdict %s", pooled, verdict.value)
    return out


def _effect_to_dict(r):
    return {
        "game_id": r.game_id,
        "d": r.d,
        "hedges_g": r.hedges_g,
        "ci95": list(r.ci95),
        "n_named": r.n_named,
        "n_aggregate": r.n_aggregate,
        "verdict": r.verdict.value,
        **r.details,
    }


def report_to_dict(report) -> dict:
    if isinstance(report, EffectSizeReport):
        return _effect_to_dict(report)
    return {
        "verdict": report.verdict.value,
        "pooled_d": report.pooled_d,
        "pooled_se": report.pooled_se,
        "ordering": report.ordering,
        "trend_tau": report.trend_tau,
        "monotone": report.monotone,
        "games": [_effect_to_dict(r) for r in report.per_game],
    }


def report_to_markdown(report) -> str:
    lines = [
        f"**Verdict:** {report.verdict.value} (pooled d = {report.pooled_d:.3f} ± {report.pooled_se:.3f})",
        "",
        "| game | d | Hedges g | 95% CI | n named | n aggregate | verdict |",
        "|---|---|---|---|---|---|---|",
    ]
    for r in report.per_game:
        lines.append(
            f"| {r.game_id} | {r.d:.3f} | {r.hedges_g:.3f} | [{r.ci95[0]:.3f}, {r.ci95[1]:.3f}] "
            f"| {r.n_named} | {r.n_aggregate} | {r.verdict.value} |"
        )
    if report.trend_tau is not None:
        lines += ["", f"Trend along {', '.join(report.ordering)}: Kendall tau = {report.trend_tau:.3f}"]
    return "\n".join(lines) + "\n"
