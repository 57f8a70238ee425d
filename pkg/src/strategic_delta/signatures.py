"""
Signature tests that separate structured residuals from noise.

Four tests look for human-shaped structure (conditional dependence,
distributional asymmetry, path dependence, paraphrase stability), two
covariate tests look for LLM-shaped structure (compute-budget scaling,
framing insensitivity), and :func:`classify_profile` combines the flags.

Every resampling loop takes a seed and draws from deterministic
substreams, so results do not depend on the worker count.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy import stats
from statsmodels.stats.power import TTestIndPower, TTestPower

from . import DEFAULT_BOOTSTRAP, DEFAULT_PERMUTATIONS, DEFAULT_SEED, LOG, SIGNIFICANCE_LEVEL
from .exceptions import (
    IncompleteResults,
    InsufficientLevels,
    InsufficientSessions,
    MeanNearZero,
    RankDeficient,
    SessionTooShort,
    StrategicDeltaError,
    TooFewObservations,
    TooFewParaphrases,
    ZeroVariance,
)
from .game_model import Framing
from .residuals import (
    DEFAULT_BLOCK_SIZE,
    Pooling,
    delta_series,
    deltas_to_frame,
    drop_incomplete_sessions,
    standardize_deltas,
)
from .utils import resample_chunks

__all__ = [
    "BatterySettings",
    "Direction",
    "ParaphraseOutcome",
    "Shape",
    "SignatureProfile",
    "SignatureResult",
    "adjusted_skewness",
    "classify_flags",
    "classify_profile",
    "predicted_direction",
    "profile_to_dict",
    "profile_to_markdown",
    "run_battery",
    "test_conditional_dependence",
    "test_distributional_asymmetry",
    "test_llm_covariates",
    "test_paraphrase_robustness",
    "test_path_dependence",
]

CONDITIONAL_DEPENDENCE = "conditional_dependence"
ASYMMETRY = "distributional_asymmetry"
PATH_DEPENDENCE = "path_dependence"
PARAPHRASE = "paraphrase_robustness"
BUDGET_SCALING = "budget_scaling"
FRAMING_INSENSITIVITY = "framing_insensitivity"
HUMAN_TESTS = (CONDITIONAL_DEPENDENCE, ASYMMETRY, PATH_DEPENDENCE, PARAPHRASE)

SKEW_THRESHOLD = 0.5
COV_THRESHOLD = 0.2
MEAN_EPSILON = 1e-6
MIN_SKEW_N = 8
MIN_SESSION_ROUNDS = 10
MIN_SESSIONS = 5
MIN_PARAPHRASES = 5
MIN_BUDGET_LEVELS = 3
MEDIUM_D = 0.5
MEDIUM_F2 = 0.15
DEFAULT_SHUFFLES = 200
DEFAULT_LAG_ORDER = 1


class Direction(str, Enum):
    LEFT = "Left"
    RIGHT = "Right"


class ParaphraseOutcome(str, Enum):
    STABLE = "Stable"
    SENSITIVE = "Sensitive"
    UNDEFINED = "Undefined"


class Shape(str, Enum):
    HUMAN_SHAPED = "HumanShaped"
    LLM_SHAPED = "LLMShaped"
    UNSTRUCTURED = "Unstructured"
    MIXED = "Mixed"


@dataclass
class SignatureResult:
    test: str
    statistic: float
    p_value: float
    effect: float
    flagged: bool
    direction_predicted: Direction = None
    direction_observed: Direction = None
    power: float = None
    outcome: str = None
    error: str = None
    details: dict = field(default_factory=dict)

    @classmethod
    def failed(cls, test, error):
        """A test that could not run counts as not flagged."""
        LOG.warning("%s not evaluated: %s: %s", test, type(error).__name__, error)
        return cls(
            test=test,
            statistic=math.nan,
            p_value=1.0,
            effect=math.nan,
            flagged=False,
            outcome=ParaphraseOutcome.UNDEFINED.value if test == PARAPHRASE else None,
            error=f"{type(error).__name__}: {error}",
        )


@dataclass
class SignatureProfile:
    results: dict
    llm_results: list
    classification: Shape
    n_observations: int = 0
    dropped_sessions: int = 0
    seed: int = None


def predicted_direction(framing) -> Direction:
    """Gain frames predict left skew, Loss frames right skew."""
    framing = Framing(framing)
    if framing is Framing.GAIN:
        return Direction.LEFT
    if framing is Framing.LOSS:
        return Direction.RIGHT
    raise InsufficientLevels("framing", 0, 1)


def _permutation_p(observed, null, tol=1e-12):
    return float((1 + np.sum(null >= observed - tol)) / (1 + len(null)))


def _design(features):
    frame = pd.DataFrame(features).reset_index(drop=True)
    for column in frame.columns:
        if frame[column].nunique(dropna=False) < 2:
            raise RankDeficient(int(frame.shape[1]) - 1, int(frame.shape[1]))
    categorical = [
        c for c in frame.columns if not pd.api.types.is_numeric_dtype(frame[c]) or frame[c].dtype == bool
    ]
    encoded = pd.get_dummies(frame, columns=categorical, drop_first=True, dtype=float)
    return sm.add_constant(encoded.astype(float), has_constant="add")


def test_conditional_dependence(
    deltas,
    features,
    n_permutations=DEFAULT_PERMUTATIONS,
    seed=DEFAULT_SEED,
    workers=1,
) -> SignatureResult:
    """
    Regress residuals on game-environment features.

    The joint null (all slopes zero) is tested with the analytic F-test and
    with a permutation test of R-squared; the permutation p decides the flag.

    :param deltas: Residuals, one per observation.
    :param features: Mapping or DataFrame of feature columns, one row per
        residual. Non-numeric columns are one-hot encoded.
    :raise RankDeficient: On a constant or collinear feature column.
    :raise TooFewObservations: Unless n >= 10 + number of regressors.
    """
    y = np.asarray(deltas, dtype=float)
    x = _design(features)
    n, p = x.shape
    rank = int(np.linalg.matrix_rank(x.values))
    if rank < p:
        raise RankDeficient(rank, p)
    if n < 10 + (p - 1):
        raise TooFewObservations(n, 10 + (p - 1))

    fit = sm.OLS(y, x).fit()
    q, _ = np.linalg.qr(x.values)
    observed = float(np.sum((q.T @ y) ** 2))

    def draw(rng, size):
        shuffled = rng.permuted(np.tile(y, (size, 1)), axis=1)
        return np.sum((shuffled @ q) ** 2, axis=1)

    null = resample_chunks(n_permutations, seed, draw, workers=workers)
    p_perm = _permutation_p(observed, null)

    df1, df2 = p - 1, n - p
    critical = stats.f.ppf(1 - SIGNIFICANCE_LEVEL, df1, df2)
    power = float(stats.ncf.sf(critical, df1, df2, MEDIUM_F2 * n))
    LOG.debug("Conditional dependence: R2=%.4f, F p=%.4g, perm p=%.4g", fit.rsquared, fit.f_pvalue, p_perm)
    return SignatureResult(
        test=CONDITIONAL_DEPENDENCE,
        statistic=float(fit.fvalue),
        p_value=p_perm,
        effect=float(fit.rsquared),
        flagged=p_perm < SIGNIFICANCE_LEVEL,
        power=power,
        details={
            "f_p_value": float(fit.f_pvalue),
            "n": int(n),
            "regressors": list(x.columns[1:]),
            "coefficients": {k: float(v) for k, v in fit.params.items()},
            "n_permutations": int(n_permutations),
        },
    )


def adjusted_skewness(values) -> float:
    """
    Adjusted Fisher-Pearson skewness G1.

    Example:
        >>> adjusted_skewness([0, 0, 0, 1])
        2.0
    """
    x = np.asarray(values, dtype=float)
    if len(x) < 3:
        raise TooFewObservations(len(x), 3)
    if np.ptp(x) == 0:
        raise ZeroVariance("All residuals are identical")
    return float(round(stats.skew(x, bias=False), 12))


def test_distributional_asymmetry(
    deltas,
    predicted_direction,
    n_bootstrap=DEFAULT_BOOTSTRAP,
    seed=DEFAULT_SEED,
    workers=1,
) -> SignatureResult:
    """
    Skewness of the residuals against the frame's predicted direction.

    Flagged iff ``|G1| > 0.5`` and the sign matches ``predicted_direction``.

    :raise TooFewObservations: Below 8 residuals.
    :raise ZeroVariance: If all residuals are identical.
    """
    x = np.asarray(deltas, dtype=float)
    if len(x) < MIN_SKEW_N:
        raise TooFewObservations(len(x), MIN_SKEW_N)
    predicted = Direction(predicted_direction)
    g1 = adjusted_skewness(x)
    p_value = float(stats.skewtest(x).pvalue)

    def draw(rng, size):
        idx = rng.integers(0, len(x), size=(size, len(x)))
        return stats.skew(x[idx], axis=1, bias=False)

    boot = resample_chunks(n_bootstrap, seed, draw, workers=workers)
    boot = boot[np.isfinite(boot)]
    ci = (float(np.percentile(boot, 2.5)), float(np.percentile(boot, 97.5))) if len(boot) else (math.nan, math.nan)
    observed = Direction.RIGHT if g1 > 0 else Direction.LEFT if g1 < 0 else None
    return SignatureResult(
        test=ASYMMETRY,
        statistic=g1,
        p_value=p_value,
        effect=g1,
        flagged=abs(g1) > SKEW_THRESHOLD and observed is predicted,
        direction_predicted=predicted,
        direction_observed=observed,
        details={"ci95": list(ci), "n": int(len(x)), "n_bootstrap": int(n_bootstrap)},
    )


def _lag_design(y, opponent, lag_order):
    """Columns: const, y lags 1..L, opponent lag 1 (when observed), round index."""
    t = np.arange(lag_order, len(y))
    columns = [np.ones(len(t))]
    columns += [y[t - lag] for lag in range(1, lag_order + 1)]
    opp = opponent[t - 1]
    has_opp = np.isfinite(opp).all() and np.ptp(opp) > 0
    if has_opp:
        columns.append(opp)
    columns.append(t.astype(float))
    return y[t], np.column_stack(columns), has_opp


def _lag_coefficient(y, opponent):
    target, x, _ = _lag_design(y, opponent, 1)
    if np.ptp(x[:, 1]) == 0:
        return 0.0
    beta = np.linalg.lstsq(x, target, rcond=None)[0]
    return float(beta[1])


def _granger_p(y, opponent, lag_order):
    """F-test of the own-lag block: full model against the lag-free model."""
    target, x, _ = _lag_design(y, opponent, lag_order)
    if np.ptp(target) == 0:
        return 1.0
    own = list(range(1, lag_order + 1))
    restricted = np.delete(x, own, axis=1)
    full = sm.OLS(target, x).fit()
    base = sm.OLS(target, restricted).fit()
    if full.df_resid <= 0:
        return 1.0
    f_value, p_value, _ = full.compare_f_test(base)
    return float(p_value) if np.isfinite(p_value) else 1.0


def test_path_dependence(
    sessions,
    n_shuffles=DEFAULT_SHUFFLES,
    lag_order=DEFAULT_LAG_ORDER,
    seed=DEFAULT_SEED,
) -> SignatureResult:
    """
    Lag dependence of play across repeated rounds.

    Per session, y_t is regressed on y_{t-1} with the lagged opponent
    decision and the round index as controls. Each session's lag
    coefficient is centred on its mean under within-session shuffles
    (removing the short-series bias), and the centred coefficients are
    tested against 0 with a one-sample t-test. A Granger-style F-test of
    the own-lag block is combined across sessions with Fisher's method and
    reported alongside.

    :param sessions: :class:`DeltaSeries` objects. Their round-level play
        (:attr:`DeltaSeries.play`) is used, not block rates.
    :raise SessionTooShort: If a session has fewer than 10 rounds.
    :raise InsufficientSessions: With fewer than 5 sessions.
    """
    sessions = list(sessions)
    plays = [s.play for s in sessions]
    for s, (own, _) in zip(sessions, plays):
        if len(own) < MIN_SESSION_ROUNDS:
            raise SessionTooShort(s.session_id, len(own), MIN_SESSION_ROUNDS)
    if len(sessions) < MIN_SESSIONS:
        raise InsufficientSessions(len(sessions), MIN_SESSIONS)

    raw, corrected, granger = [], [], []
    for i, (own, other) in enumerate(plays):
        y = np.asarray(own, dtype=float)
        opp = np.asarray(other, dtype=float)
        coef = _lag_coefficient(y, opp)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        null = [_lag_coefficient(rng.permutation(y), opp) for _ in range(n_shuffles)]
        raw.append(coef)
        corrected.append(coef - float(np.mean(null)))
        granger.append(_granger_p(y, opp, lag_order))

    corrected = np.asarray(corrected)
    if np.ptp(corrected) == 0:
        t_stat = 0.0 if corrected[0] == 0 else math.inf
        p_value = 1.0 if corrected[0] == 0 else 0.0
    else:
        t_stat, p_value = stats.ttest_1samp(corrected, 0.0)
        t_stat, p_value = float(t_stat), float(p_value)
    fisher_p = float(stats.combine_pvalues(granger, method="fisher").pvalue)
    power = float(TTestPower().power(effect_size=MEDIUM_D, nobs=len(sessions), alpha=SIGNIFICANCE_LEVEL))
    return SignatureResult(
        test=PATH_DEPENDENCE,
        statistic=t_stat,
        p_value=p_value,
        effect=float(np.mean(corrected)),
        flagged=p_value < SIGNIFICANCE_LEVEL,
        power=power,
        details={
            "n_sessions": len(sessions),
            "mean_raw_coefficient": float(np.mean(raw)),
            "granger_fisher_p": fisher_p,
            "lag_order": int(lag_order),
            "n_shuffles": int(n_shuffles),
        },
    )


def test_paraphrase_robustness(
    deltas_by_paraphrase,
    n_permutations=DEFAULT_PERMUTATIONS,
    seed=DEFAULT_SEED,
) -> SignatureResult:
    """
    Coefficient of variation of mean residuals across prompt paraphrases.

    Stable (flagged) iff ``CoV < 0.2``, sensitive otherwise. The p-value is a
    permutation test of between-paraphrase dispersion on the raw residuals.

    :param deltas_by_paraphrase: Mapping paraphrase id -> residuals (or a
        single group mean).
    :raise TooFewParaphrases: With fewer than 5 groups.
    :raise MeanNearZero: If the mean of group means is below 1e-6 in magnitude.
    """
    groups = {
        k: np.atleast_1d(np.asarray(v, dtype=float))
        for k, v in sorted(deltas_by_paraphrase.items())
        if len(np.atleast_1d(v))
    }
    if len(groups) < MIN_PARAPHRASES:
        raise TooFewParaphrases(len(groups), MIN_PARAPHRASES)
    means = np.array([g.mean() for g in groups.values()])
    grand = float(means.mean())
    if abs(grand) < MEAN_EPSILON:
        raise MeanNearZero(grand)
    cov = float(np.std(means, ddof=1) / abs(grand))

    values = np.concatenate(list(groups.values()))
    labels = np.repeat(np.arange(len(groups)), [len(g) for g in groups.values()])
    counts = np.bincount(labels)

    def dispersion(ys):
        sums = np.stack([np.bincount(labels, weights=row, minlength=len(counts)) for row in ys])
        return np.sum(sums**2 / counts, axis=1)

    observed = float(dispersion(values[None, :])[0])

    def draw(rng, size):
        return dispersion(rng.permuted(np.tile(values, (size, 1)), axis=1))

    if len(values) > len(groups):
        p_value = _permutation_p(observed, resample_chunks(n_permutations, seed, draw))
    else:
        p_value = 1.0
    stable = cov < COV_THRESHOLD
    return SignatureResult(
        test=PARAPHRASE,
        statistic=cov,
        p_value=p_value,
        effect=cov,
        flagged=stable,
        outcome=(ParaphraseOutcome.STABLE if stable else ParaphraseOutcome.SENSITIVE).value,
        details={"group_means": {str(k): float(m) for k, m in zip(groups, means)}},
    )


def test_llm_covariates(
    deltas,
    conditions,
    n_permutations=DEFAULT_PERMUTATIONS,
    seed=DEFAULT_SEED,
    workers=1,
) -> list:
    """
    Budget scaling and framing insensitivity of residuals.

    (a) Kendall's tau between ``|delta|`` and compute budget with a
    permutation p (flagged iff p < 0.05); (b) a permutation test of the
    residual mean across framing levels, where failing to reject is the
    flagged outcome, reported with power against d = 0.5.

    :raise InsufficientLevels: With fewer than 3 budget or 2 framing levels.
    """
    x = np.asarray(deltas, dtype=float)
    budgets = np.array([c.compute_budget for c in conditions], dtype=float)
    frames = np.array([Framing(c.framing).value for c in conditions])
    n_budgets = len(np.unique(budgets))
    if n_budgets < MIN_BUDGET_LEVELS:
        raise InsufficientLevels("compute_budget", n_budgets, MIN_BUDGET_LEVELS)
    frame_levels, frame_codes = np.unique(frames, return_inverse=True)
    if len(frame_levels) < 2:
        raise InsufficientLevels("framing", len(frame_levels), 2)

    magnitude = np.abs(x)
    tau = float(stats.kendalltau(magnitude, budgets).statistic)

    def tau_draw(rng, size):
        return np.array(
            [abs(stats.kendalltau(magnitude, rng.permutation(budgets)).statistic) for _ in range(size)]
        )

    tau_p = _permutation_p(abs(tau), resample_chunks(n_permutations, seed, tau_draw, workers=workers))
    budget = SignatureResult(
        test=BUDGET_SCALING,
        statistic=tau,
        p_value=tau_p,
        effect=tau,
        flagged=tau_p < SIGNIFICANCE_LEVEL,
        details={"budget_levels": sorted(float(b) for b in np.unique(budgets))},
    )

    counts = np.bincount(frame_codes)

    def between(ys):
        sums = np.stack([np.bincount(frame_codes, weights=row, minlength=len(counts)) for row in ys])
        return np.sum(sums**2 / counts, axis=1)

    observed = float(between(x[None, :])[0])

    def frame_draw(rng, size):
        return between(rng.permuted(np.tile(x, (size, 1)), axis=1))

    frame_p = _permutation_p(observed, resample_chunks(n_permutations, seed + 1, frame_draw, workers=workers))
    means = {str(level): float(x[frame_codes == i].mean()) for i, level in enumerate(frame_levels)}
    largest = np.sort(counts)[::-1]
    power = float(
        TTestIndPower().power(
            effect_size=MEDIUM_D,
            nobs1=int(largest[0]),
            ratio=float(largest[1] / largest[0]),
            alpha=SIGNIFICANCE_LEVEL,
        )
    )
    framing = SignatureResult(
        test=FRAMING_INSENSITIVITY,
        statistic=observed,
        p_value=frame_p,
        effect=float(max(means.values()) - min(means.values())),
        flagged=frame_p >= SIGNIFICANCE_LEVEL,
        power=power,
        details={"frame_means": means},
    )
    return [budget, framing]


def classify_flags(
    dependence,
    asymmetry,
    path,
    stable,
    sensitive=False,
    budget=False,
    framing_insensitive=False,
) -> Shape:
    """Pure decision rule over the seven flags."""
    human = sum(map(bool, (dependence, asymmetry, path, stable)))
    if human >= 3:
        return Shape.HUMAN_SHAPED
    if sensitive and (budget or framing_insensitive) and not path:
        return Shape.LLM_SHAPED
    if human == 0:
        return Shape.UNSTRUCTURED
    return Shape.MIXED


def classify_profile(results, llm_results=None, **extra) -> SignatureProfile:
    """
    Classify a set of signature results.

    :param results: The four human-shaped results, as a list or a mapping by test name.
    :raise IncompleteResults: If any of the four is missing.
    """
    if not isinstance(results, dict):
        results = {r.test: r for r in results}
    missing = [name for name in HUMAN_TESTS if name not in results]
    if missing:
        raise IncompleteResults(missing)
    llm_results = list(llm_results or [])
    llm = {r.test: r for r in llm_results}
    paraphrase = results[PARAPHRASE]
    shape = classify_flags(
        dependence=results[CONDITIONAL_DEPENDENCE].flagged,
        asymmetry=results[ASYMMETRY].flagged,
        path=results[PATH_DEPENDENCE].flagged,
        stable=paraphrase.outcome == ParaphraseOutcome.STABLE.value,
        sensitive=paraphrase.outcome == ParaphraseOutcome.SENSITIVE.value,
        budget=BUDGET_SCALING in llm and llm[BUDGET_SCALING].flagged,
        framing_insensitive=FRAMING_INSENSITIVITY in llm and llm[FRAMING_INSENSITIVITY].flagged,
    )
    return SignatureProfile(
        results={name: results[name] for name in HUMAN_TESTS},
        llm_results=llm_results,
        classification=shape,
        **extra,
    )


@dataclass
class BatterySettings:
    n_permutations: int = DEFAULT_PERMUTATIONS
    n_bootstrap: int = DEFAULT_BOOTSTRAP
    seed: int = DEFAULT_SEED
    block_size: int = DEFAULT_BLOCK_SIZE
    pooling: Pooling = Pooling.PER_GAME
    n_shuffles: int = DEFAULT_SHUFFLES
    lag_order: int = DEFAULT_LAG_ORDER
    workers: int = 1


def _guarded(test, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except StrategicDeltaError as e:
        return SignatureResult.failed(test, e)


def _asymmetry_subset(frame):
    for framing in (Framing.LOSS, Framing.GAIN):
        subset = frame[frame["framing"] == framing.value]
        if len(subset):
            return subset["delta"].to_numpy(), predicted_direction(framing)
    raise InsufficientLevels("framing", 0, 1)


def run_battery(records, games, baselines, settings=None) -> SignatureProfile:
    """
    Run the whole signature battery on observed records.

    Tests that cannot run on the data (too few sessions, a single
    paraphrase, constant features, ...) are recorded as not flagged with
    the error name. LLM covariate tests run when the data carries at least
    3 compute-budget levels and 2 framing levels.

    :param records: :class:`RoundRecord` objects.
    :param games: Mapping game id -> GameSpec.
    :param baselines: Mapping ``(game_id, role)`` -> Baseline.
    """
    settings = settings or BatterySettings()
    kept, dropped = drop_incomplete_sessions(records, games)
    series = delta_series(kept, games, baselines, settings.block_size)
    try:
        scaled = standardize_deltas(series, settings.pooling)
    except StrategicDeltaError as e:
        LOG.warning("Residuals left unscaled: %s", e)
        scaled = series
    frame = deltas_to_frame(scaled)
    LOG.info(
        "Running signature battery on %d residuals from %d series (seed %d)",
        len(frame),
        len(series),
        settings.seed,
    )

    candidates = {
        "family": frame["family"],
        "individuation": frame["individuation"],
        "stake_scale": frame["stake_scale"],
        "framing": frame["framing"],
    }
    varying = {k: v for k, v in candidates.items() if v.nunique() > 1}
    if varying:
        dependence = _guarded(
            CONDITIONAL_DEPENDENCE,
            test_conditional_dependence,
            frame["delta"].to_numpy(),
            pd.DataFrame(varying),
            n_permutations=settings.n_permutations,
            seed=settings.seed,
            workers=settings.workers,
        )
    else:
        dependence = SignatureResult.failed(CONDITIONAL_DEPENDENCE, RankDeficient(0, len(candidates)))

    try:
        values, direction = _asymmetry_subset(frame)
        asymmetry = _guarded(
            ASYMMETRY,
            test_distributional_asymmetry,
            values,
            direction,
            n_bootstrap=settings.n_bootstrap,
            seed=settings.seed,
            workers=settings.workers,
        )
    except StrategicDeltaError as e:
        asymmetry = SignatureResult.failed(ASYMMETRY, e)

    path = _guarded(
        PATH_DEPENDENCE,
        test_path_dependence,
        series,
        n_shuffles=settings.n_shuffles,
        lag_order=settings.lag_order,
        seed=settings.seed,
    )

    groups = {int(k): g["delta"].to_numpy() for k, g in frame.groupby("paraphrase_id")}
    paraphrase = _guarded(
        PARAPHRASE,
        test_paraphrase_robustness,
        groups,
        n_permutations=settings.n_permutations,
        seed=settings.seed,
    )

    llm_results = []
    conditions = [s.condition for s in scaled for _ in range(len(s))]
    if frame["compute_budget"].nunique() >= MIN_BUDGET_LEVELS and frame["framing"].nunique() >= 2:
        try:
            llm_results = test_llm_covariates(
                frame["delta"].to_numpy(),
                conditions,
                n_permutations=settings.n_permutations,
                seed=settings.seed,
                workers=settings.workers,
            )
        except StrategicDeltaError as e:
            LOG.warning("LLM covariate tests not evaluated: %s", e)

    profile = classify_profile(
        [dependence, asymmetry, path, paraphrase],
        llm_results,
        n_observations=int(len(frame)),
        dropped_sessions=len(dropped),
        seed=settings.seed,
    )
    LOG.info("Signature profile: %s", profile.classification.value)
    return profile


def _result_to_dict(result):
    data = {
        "test": result.test,
        "statistic": result.statistic,
        "p_value": result.p_value,
        "effect": result.effect,
        "flagged": result.flagged,
        "direction_predicted": result.direction_predicted.value if result.direction_predicted else None,
        "direction_observed": result.direction_observed.value if result.direction_observed else None,
        "power": result.power,
        "outcome": result.outcome,
        "error": result.error,
        "details": result.details,
    }
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in data.items()}


def profile_to_dict(profile) -> dict:
    return {
        "classification": profile.classification.value,
        "n_observations": profile.n_observations,
        "dropped_sessions": profile.dropped_sessions,
        "seed": profile.seed,
        "tests": [_result_to_dict(r) for r in profile.results.values()],
        "llm_tests": [_result_to_dict(r) for r in profile.llm_results],
    }


def _fmt(value):
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return "n/a"
    return f"{value:.4g}"


def profile_to_markdown(profile) -> str:
    lines = [
        f"**Classification:** {profile.classification.value}",
        "",
        "| test | statistic | p | effect | power | flagged | note |",
        "|---|---|---|---|---|---|---|",
    ]
    for r in list(profile.results.values()) + list(profile.llm_results):
        note = r.error or r.outcome or (r.direction_observed.value if r.direction_observed else "")
        lines.append(
            f"| {r.test} | {_fmt(r.statistic)} | {_fmt(r.p_value)} | {_fmt(r.effect)} "
            f"| {_fmt(r.power)} | {'yes' if r.flagged else 'no'} | {note} |"
        )
    return "\n".join(lines) + "\n"


# keep pytest from collecting the test_* functions when imported into test modules
for _func in (
    test_conditional_dependence,
    test_distributional_asymmetry,
    test_path_dependence,
    test_paraphrase_robustness,
    test_llm_covariates,
):
    _func.__test__ = False
