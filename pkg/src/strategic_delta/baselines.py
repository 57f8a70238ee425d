"""
Classical baselines y_strategic for canonical and generated games.

A baseline is the fixed point of whichever classical model the analyst
picks for a game: a closed-form Nash/SPE prescription, a level-k or
cognitive-hierarchy action, a logit quantal response equilibrium, or an
equilibrium of a generated bimatrix game found by support enumeration.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations

import numpy as np
from scipy.special import softmax
from scipy.stats import poisson

from . import DEFAULT_GRID_POINTS, LOG
from .exceptions import (
    InvalidParams,
    InvalidRho,
    NoConvergence,
    NoEquilibriumFound,
    OutOfRange,
    Unsupported,
    WrongFamily,
)
from .game_model import COOPERATE, DEFECT, DiscreteSet, Family, normalize_action

__all__ = [
    "Baseline",
    "BaselineKind",
    "Benchmark",
    "BenchmarkKind",
    "BimatrixEquilibria",
    "UNIFORM_MIDPOINT",
    "action_grid",
    "baseline_to_dict",
    "closed_form_baseline",
    "cognitive_hierarchy_action",
    "fairness_rejection_threshold",
    "grid_best_response",
    "level_k_action",
    "literal_fairness_utility",
    "logit_qre",
    "logit_response",
    "max_deviation_gain",
    "risk_averse_bid",
    "select_baseline",
    "solve_bimatrix_nash",
    "stage_payoff",
]

UNIFORM_MIDPOINT = "UniformMidpoint"
ORACLE_GRID_POINTS = 10_001
DEFAULT_TAU = 1.5
DEFAULT_QRE_DAMPING = 0.5
DEFAULT_QRE_TOLERANCE = 1e-10
DEFAULT_QRE_MAX_ITER = 100_000
WEIGHT_TOLERANCE = 1e-9
PROBABILITY_CLAMP = -1e-9
DEVIATION_TOLERANCE = 1e-8


class BaselineKind(str, Enum):
    POINT = "Point"
    MIXED = "Mixed"


class BenchmarkKind(str, Enum):
    NASH = "Nash"
    SPE = "SPE"
    LEVEL_K = "LevelK"
    COGNITIVE_HIERARCHY = "CognitiveHierarchy"
    LOGIT_QRE = "LogitQRE"


@dataclass(frozen=True)
class Benchmark:
    kind: BenchmarkKind
    k: int = None
    tau: float = None
    lam: float = None

    def __str__(self):
        if self.kind is BenchmarkKind.LEVEL_K:
            return f"LevelK({self.k})"
        if self.kind is BenchmarkKind.COGNITIVE_HIERARCHY:
            return f"CognitiveHierarchy(tau={self.tau:g},k={self.k})"
        if self.kind is BenchmarkKind.LOGIT_QRE:
            return f"LogitQRE({self.lam:g})"
        return self.kind.value

    @classmethod
    def parse(cls, name, k=None, tau=None, lam=None):
        """Build a benchmark from a CLI/config name such as ``level-k`` or ``qre``."""
        key = str(name).replace("-", "").replace("_", "").lower()
        if key in ("nash", "closedform"):
            return cls(BenchmarkKind.NASH)
        if key == "spe":
            return cls(BenchmarkKind.SPE)
        if key in ("levelk", "lk"):
            if k is None:
                raise InvalidParams("level-k benchmark needs k")
            return cls(BenchmarkKind.LEVEL_K, k=int(k))
        if key in ("ch", "cognitivehierarchy"):
            if k is None:
                raise InvalidParams("cognitive-hierarchy benchmark needs k")
            return cls(
                BenchmarkKind.COGNITIVE_HIERARCHY,
                k=int(k),
                tau=float(DEFAULT_TAU if tau is None else tau),
            )
        if key in ("qre", "logitqre"):
            if lam is None:
                raise InvalidParams("logit QRE benchmark needs lambda")
            return cls(BenchmarkKind.LOGIT_QRE, lam=float(lam))
        raise InvalidParams(f"Unknown benchmark {name!r}")


NASH = Benchmark(BenchmarkKind.NASH)
SPE = Benchmark(BenchmarkKind.SPE)


@dataclass(frozen=True)
class Baseline:
    """The classical prescription for one role of one game."""

    game_id: str
    role: int
    kind: BaselineKind
    benchmark: Benchmark
    point: object = None
    support: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        if self.kind is BaselineKind.MIXED:
            w = np.asarray(self.weights, dtype=float)
            if len(w) != len(self.support) or len(w) == 0:
                raise InvalidParams("Mixed baseline needs one weight per support action")
            if (w < 0).any() or abs(w.sum() - 1.0) > WEIGHT_TOLERANCE:
                raise InvalidParams("Mixed baseline weights must be a distribution")
        elif self.point is None:
            raise InvalidParams("Point baseline needs a point")

    @property
    def numeric(self) -> bool:
        values = (self.point,) if self.kind is BaselineKind.POINT else self.support
        return all(not isinstance(v, str) for v in values)

    def mean(self) -> float:
        """Point value, or the mixed-strategy mean for numeric supports."""
        if not self.numeric:
            raise Unsupported(self.game_id, "labelled actions have no mean")
        if self.kind is BaselineKind.POINT:
            return float(self.point)
        return float(np.dot(self.weights, self.support))

    def normalized(self, game) -> float:
        """Comparison point on the unit interval used for delta."""
        if self.kind is BaselineKind.POINT:
            return normalize_action(game, self.role, self.point)
        return float(
            sum(w * normalize_action(game, self.role, a) for a, w in zip(self.support, self.weights))
        )

    def probability(self, action) -> float:
        if self.kind is BaselineKind.POINT:
            return 1.0 if action == self.point else 0.0
        return float(sum(w for a, w in zip(self.support, self.weights) if a == action))


@dataclass
class BimatrixEquilibria:
    """Equilibria found by support enumeration, plus the singular supports met on the way."""

    profiles: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.profiles)

    def __len__(self):
        return len(self.profiles)

    def __getitem__(self, item):
        return self.profiles[item]


def _point(game, role, value, benchmark) -> Baseline:
    space = game.action_space(role)
    if space is None or not space.contains(value):
        raise OutOfRange(value, space)
    return Baseline(game.id, role, BaselineKind.POINT, benchmark, point=value)


def _uniform_mix(game, role, lo, hi, grid_points, benchmark):
    support = tuple(float(v) for v in np.linspace(lo, hi, grid_points))
    weights = tuple([1.0 / grid_points] * grid_points)
    return Baseline(game.id, role, BaselineKind.MIXED, benchmark, support=support, weights=weights)


def closed_form_baseline(game, role, grid_points=DEFAULT_GRID_POINTS) -> Baseline:
    """
    Closed-form Nash/SPE prescription for a canonical game.

    :param game: Canonical :class:`GameSpec`.
    :param role: Role index.
    :param grid_points: Support size used to represent continuous mixed equilibria.
    :raise Unsupported: For configurations without a closed form.
    """
    f, p = game.family, game.params
    if f is Family.GENERATED_BIMATRIX:
        raise Unsupported(f.value, "use solve_bimatrix_nash")
    if game.action_space(role) is None:
        raise Unsupported(f.value, f"role {role} takes no action")

    if f is Family.DICTATOR:
        return _point(game, role, 0.0, NASH)
    if f is Family.ULTIMATUM:
        # the proposer offers the smallest money unit; the responder accepts any positive offer
        return _point(game, role, p["u"] if role == 0 else 0.0, SPE)
    if f is Family.TRUST:
        return _point(game, role, 0.0, SPE)
    if f is Family.PRISONERS_DILEMMA:
        return _point(game, role, DEFECT, NASH)
    if f is Family.PUBLIC_GOODS:
        return _point(game, role, 0.0, NASH)
    if f is Family.PBEAUTY:
        return _point(game, role, 0.0, NASH)
    if f is Family.SECOND_PRICE_AUCTION:
        return _point(game, role, p["V"], NASH)
    if f is Family.FIRST_PRICE_AUCTION:
        n = game.n_players
        bid = p["V"] - (p["V"] - p["v_lo"]) / n
        return _point(game, role, bid, NASH)
    if f is Family.ALL_PAY_AUCTION:
        if game.n_players != 2:
            raise Unsupported(f.value, f"{game.n_players} players")
        return _uniform_mix(game, role, 0.0, p["V"], grid_points, NASH)
    if f is Family.TULLOCK_CONTEST:
        if p["r"] > 1:
            raise Unsupported(f.value, f"r={p['r']} > 1, pure equilibrium may fail")
        n = game.n_players
        return _point(game, role, p["r"] * p["V"] * (n - 1) / n**2, NASH)
    raise Unsupported(f.value)


def _opponent_role(game, role):
    if game.n_players == 2 and len(game.action_spaces) == 2:
        return 1 - role
    return role


def action_grid(game, role, grid_points=DEFAULT_GRID_POINTS):
    """Actions a role chooses from: labels, money units, or an even grid."""
    space = game.action_space(role)
    if space is None:
        return (None,)
    if isinstance(space, DiscreteSet):
        return space.labels
    if game.family is Family.ULTIMATUM:
        unit = game.params["u"]
        steps = int(math.floor(space.hi / unit + 1e-9))
        return np.arange(steps + 1) * unit
    return np.linspace(space.lo, space.hi, int(grid_points))


def _continuous_payoff(game, role, own, opp):
    """Vector of stage payoffs for own actions ``own`` against a point ``opp``."""
    f, p = game.family, game.params
    own = np.asarray(own, dtype=float)
    if f is Family.DICTATOR:
        if role != 0:
            raise Unsupported(f.value, "the recipient takes no action")
        return p["P"] - own
    if f is Family.ULTIMATUM:
        if role == 0:
            return np.where(own >= opp, p["P"] - own, 0.0)
        return np.where(opp >= own, opp, 0.0)
    if f is Family.TRUST:
        if role == 0:
            return p["P"] - own + opp * p["k"] * own
        return p["k"] * opp * (1.0 - own)
    if f is Family.PUBLIC_GOODS:
        n = game.n_players
        return p["E"] - own + p["m"] * (own + (n - 1) * opp)
    if f is Family.FIRST_PRICE_AUCTION:
        surplus = p["V"] - own
        return np.where(own > opp, surplus, np.where(own == opp, surplus / 2, 0.0))
    if f is Family.SECOND_PRICE_AUCTION:
        surplus = p["V"] - opp
        return np.where(own > opp, surplus, np.where(own == opp, surplus / 2, 0.0))
    if f is Family.ALL_PAY_AUCTION:
        return np.where(own > opp, p["V"], np.where(own == opp, p["V"] / 2, 0.0)) - own
    if f is Family.TULLOCK_CONTEST:
        n, r, prize = game.n_players, p["r"], p["V"]
        mine = own**r
        total = mine + (n - 1) * opp**r
        with np.errstate(invalid="ignore", divide="ignore"):
            share = np.where(total > 0, mine / np.where(total > 0, total, 1.0), 1.0 / n)
        return prize * share - own
    raise Unsupported(f.value, "no two-player stage payoff")


def _discrete_payoffs(game, role, opponent_mix):
    """Expected payoff of each own label against a mix over opponent labels."""
    row, col = game.payoff_matrices()
    own_matrix = row if role == 0 else col.T
    opp_space = game.action_space(1 - role)
    q = np.zeros(len(opp_space.labels))
    for action, weight in opponent_mix:
        if action is _UNIFORM:
            q += weight / len(q)
        else:
            q[opp_space.index(action)] += weight
    return own_matrix @ q


_UNIFORM = object()


def _expected_payoffs(game, role, grid, opponent_mix, stake_scale=1.0):
    space = game.action_space(role)
    if isinstance(space, DiscreteSet):
        return stake_scale * _discrete_payoffs(game, role, opponent_mix)
    total = np.zeros(len(grid))
    for action, weight in opponent_mix:
        total += weight * _continuous_payoff(game, role, grid, action)
    return stake_scale * total


def stage_payoff(game, role, own, opponent, stake_scale=1.0) -> float:
    """
    Stage-game payoff of ``role`` playing ``own`` against ``opponent``.

    ``opponent`` is the action of the other role in two-role games and the
    action of each other player in symmetric n-player games. Stake scale
    multiplies payoffs only.
    """
    space = game.action_space(role)
    if isinstance(space, DiscreteSet):
        values = _discrete_payoffs(game, role, [(opponent, 1.0)])
        return stake_scale * float(values[space.index(own)])
    return stake_scale * float(_continuous_payoff(game, role, [own], opponent)[0])


def grid_best_response(game, role, opponent, grid_points=ORACLE_GRID_POINTS):
    """
    Best response on a grid, ties broken towards the lowest-index action.

    :param opponent: A point action, or a sequence of ``(action, weight)`` pairs.
    """
    if game.family is Family.PBEAUTY:
        raise Unsupported(game.family.value, "n-player tournament payoff")
    mix = list(opponent) if isinstance(opponent, (list, tuple)) and opponent and isinstance(
        opponent[0], tuple
    ) else [(opponent, 1.0)]
    grid = action_grid(game, role, grid_points)
    values = _expected_payoffs(game, role, grid, mix)
    best = int(np.argmax(values))
    action = grid[best]
    return action if isinstance(action, str) else float(action)


def _level0(game, role, level0_rule):
    space = game.action_space(role)
    if level0_rule != UNIFORM_MIDPOINT:
        if space is not None and not space.contains(level0_rule):
            raise OutOfRange(level0_rule, space)
        return level0_rule
    if space is None:
        return None
    if isinstance(space, DiscreteSet):
        return _UNIFORM
    return (space.lo + space.hi) / 2.0


def _check_level_support(game, role):
    if game.family is Family.TRUST and role == 1:
        raise Unsupported(game.family.value, "trustee best response")
    if game.action_space(role) is None:
        raise Unsupported(game.family.value, f"role {role} takes no action")


def level_k_action(game, role, k, level0_rule=UNIFORM_MIDPOINT, grid_points=ORACLE_GRID_POINTS):
    """
    Level-k action: level 0 plays ``level0_rule``, level k best-responds to
    everyone else playing level k-1.

    For the p-beauty contest with a midpoint level 0 this is ``H/2 * p**k``.
    """
    if k < 0:
        raise InvalidParams(f"k must be >= 0, got {k}")
    _check_level_support(game, role)
    if game.family is Family.PBEAUTY:
        start = _level0(game, role, level0_rule)
        return float(start * game.params["p"] ** k)

    other = _opponent_role(game, role)
    # chain[d] is the player reasoned about at depth d, chain[k] plays level 0
    chain = [role if depth % 2 == 0 else other for depth in range(k + 1)]
    action = _level0(game, chain[k], level0_rule)
    if k == 0:
        if action is _UNIFORM:
            raise Unsupported(game.family.value, "level 0 of a discrete game is a uniform mix")
        return action
    for depth in range(k - 1, -1, -1):
        player = chain[depth]
        if game.action_space(player) is None:
            action = None
            continue
        if depth > 0:
            _check_level_support(game, player)
        action = grid_best_response(game, player, [(action, 1.0)], grid_points)
    return action


def _poisson_weights(tau, levels):
    w = poisson.pmf(np.arange(levels), tau)
    if w.sum() <= 0:
        w = np.zeros(levels)
        w[0] = 1.0
    return w / w.sum()


def cognitive_hierarchy_action(
    game,
    role,
    k,
    tau=DEFAULT_TAU,
    level0_rule=UNIFORM_MIDPOINT,
    grid_points=ORACLE_GRID_POINTS,
):
    """
    Cognitive-hierarchy action: level k best-responds to the truncated
    Poisson(tau) mix of levels 0..k-1, each of which is itself a
    cognitive-hierarchy player.
    """
    if k < 1:
        raise InvalidParams(f"k must be >= 1, got {k}")
    if not tau > 0:
        raise InvalidParams(f"tau must be positive, got {tau}")
    _check_level_support(game, role)
    if game.family is Family.PBEAUTY:
        actions = [_level0(game, role, level0_rule)]
        for h in range(1, k + 1):
            w = _poisson_weights(tau, h)
            actions.append(game.params["p"] * float(np.dot(w, actions)))
        return float(actions[k])

    other = _opponent_role(game, role)
    roles = sorted({role, other})
    if other != role and k > 1 and game.action_space(other) is not None:
        _check_level_support(game, other)
    ladder = {r: [_level0(game, r, level0_rule)] for r in roles}
    for h in range(1, k + 1):
        w = _poisson_weights(tau, h)
        for r in roles:
            if h == k and r != role:
                continue
            opp = _opponent_role(game, r)
            if game.action_space(r) is None:
                ladder[r].append(None)
                continue
            mix = list(zip(ladder[opp][:h], w))
            ladder[r].append(grid_best_response(game, r, mix, grid_points))
    return ladder[role][k]


def payoff_tables(game, grid_points=DEFAULT_GRID_POINTS):
    """
    Discretized two-role form of a game: action lists and payoff arrays
    ``A[i, j]`` (role 0) and ``B[i, j]`` (role 1) for role-0 action i and
    role-1 action j.
    """
    f = game.family
    if f in (Family.PBEAUTY, Family.FIRST_PRICE_AUCTION, Family.SECOND_PRICE_AUCTION):
        raise Unsupported(f.value, "no complete-information two-role form")
    if f in (Family.TULLOCK_CONTEST, Family.ALL_PAY_AUCTION) and game.n_players != 2:
        raise Unsupported(f.value, f"{game.n_players} players")
    if game.is_discrete:
        row, col = game.payoff_matrices()
        return game.action_space(0).labels, game.action_space(1).labels, row, col
    first = action_grid(game, 0, grid_points)
    second_role = 1 if len(game.action_spaces) > 1 else 0
    second = action_grid(game, second_role, grid_points)
    a = np.empty((len(first), len(second)))
    b = np.zeros((len(first), len(second)))
    for j, y in enumerate(second):
        a[:, j] = _continuous_payoff(game, 0, first, y)
    if game.action_space(second_role) is not None:
        for i, x in enumerate(first):
            b[i, :] = _continuous_payoff(game, second_role, second, x)
    return tuple(first), tuple(second), a, b


def _logit_step(lam, a, b, s0, s1):
    return softmax(lam * (a @ s1)), softmax(lam * (b.T @ s0))


def logit_qre(
    game,
    lam,
    grid_points=DEFAULT_GRID_POINTS,
    damping=DEFAULT_QRE_DAMPING,
    tolerance=DEFAULT_QRE_TOLERANCE,
    max_iter=DEFAULT_QRE_MAX_ITER,
) -> dict:
    """
    Logit quantal response equilibrium by damped fixed-point iteration.

    :param lam: Precision (>= 0); 0 gives uniform play.
    :return: Mixed baselines keyed by acting role.
    :raise NoConvergence: If the residual stays above ``tolerance``.
    """
    if lam < 0:
        raise InvalidParams(f"lambda must be >= 0, got {lam}")
    if not 0 < damping <= 1:
        raise InvalidParams(f"damping must be in (0, 1], got {damping}")
    first, second, a, b = payoff_tables(game, grid_points)
    s0 = np.full(len(first), 1.0 / len(first))
    s1 = np.full(len(second), 1.0 / len(second))
    residual = math.inf
    for iteration in range(1, max_iter + 1):
        t0, t1 = _logit_step(lam, a, b, s0, s1)
        n0 = (1 - damping) * s0 + damping * t0
        n1 = (1 - damping) * s1 + damping * t1
        residual = max(np.abs(n0 - s0).max(), np.abs(n1 - s1).max())
        s0, s1 = n0, n1
        if residual < tolerance:
            LOG.debug("QRE for %s converged after %d iterations", game.id, iteration)
            break
    else:
        LOG.error("QRE for %s did not converge (residual %.3e)", game.id, residual)
        raise NoConvergence(residual, max_iter)

    bench = Benchmark(BenchmarkKind.LOGIT_QRE, lam=float(lam))
    out = {}
    for role in game.acting_roles:
        # symmetric n-player games share the representative opponent's mix
        actions, probs = (first, s0) if role == 0 else (second, s1)
        probs = probs / probs.sum()
        out[role] = Baseline(
            game.id,
            role,
            BaselineKind.MIXED,
            bench,
            support=tuple(a if isinstance(a, str) else float(a) for a in actions),
            weights=tuple(float(x) for x in probs),
        )
    return out


def logit_response(game, profile, lam, grid_points=DEFAULT_GRID_POINTS) -> dict:
    """One undamped application of the logit map to a QRE profile."""
    first, second, a, b = payoff_tables(game, grid_points)
    s0 = np.asarray(profile[0].weights)
    s1 = np.asarray(profile[1].weights) if 1 in profile else np.ones(1)
    t0, t1 = _logit_step(lam, a, b, s0, s1)
    return {0: t0, 1: t1}


def _indifference(matrix):
    """
    Solve for the opponent mix that makes every row of ``matrix`` pay the same.

    :return: ``(mix, value)``, ``None`` when no solution exists, or
        ``"degenerate"`` when the square system is singular.
    """
    k, l = matrix.shape
    lhs = np.zeros((k + 1, l + 1))
    lhs[:k, :l] = matrix
    lhs[:k, l] = -1.0
    lhs[k, :l] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    if k == l:
        if abs(np.linalg.det(lhs)) < 1e-9:
            return "degenerate"
        sol = np.linalg.solve(lhs, rhs)
    else:
        sol = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
        if not np.allclose(lhs @ sol, rhs, atol=1e-9):
            return None
    return sol[:l], sol[l]


def max_deviation_gain(row, col, x, y) -> float:
    """Largest unilateral gain available to either player at profile (x, y)."""
    row_values = row @ y
    col_values = col.T @ x
    return float(
        max(row_values.max() - x @ row_values, col_values.max() - y @ col_values)
    )


def _check_support(matrix, rows, cols):
    """Mix over ``cols`` making ``rows`` indifferent, clamped; None if invalid."""
    solved = _indifference(matrix[np.ix_(rows, cols)])
    if solved is None or isinstance(solved, str):
        return solved
    mix, value = solved
    if (mix < PROBABILITY_CLAMP).any():
        return None
    mix = np.clip(mix, 0.0, None)
    return mix / mix.sum(), value


def _supports(k):
    return [c for size in range(1, k + 1) for c in combinations(range(k), size)]


def _undominated(matrix, opponent):
    """Own actions not strictly dominated by another pure action against ``opponent``."""
    sub = matrix[:, list(opponent)]
    beats = (sub[:, None, :] > sub[None, :, :]).all(axis=2)
    return tuple(int(i) for i in np.flatnonzero(~beats.any(axis=0)))


def _support_pairs(row, col):
    """
    Every support pair that survives conditional dominance, smallest first.

    No row in the row support may be strictly beaten by another row on
    every column of the column support, and likewise for columns.
    """
    m, n = row.shape
    col_ok = {rows: frozenset(_undominated(col.T, rows)) for rows in _supports(m)}
    pairs = []
    for cols in _supports(n):
        allowed = _undominated(row, cols)
        for size in range(1, len(allowed) + 1):
            for rows in combinations(allowed, size):
                if col_ok[rows].issuperset(cols):
                    pairs.append((rows, cols))
    pairs.sort(key=lambda p: (len(p[0]) + len(p[1]), p))
    return pairs


def solve_bimatrix_nash(game) -> BimatrixEquilibria:
    """
    All Nash equilibria of a two-player matrix game by support enumeration.

    Every support pair is tried, equal and unequal sizes alike, after
    discarding pairs in which some action is strictly dominated given the
    opponent's support. Singular indifference systems are reported in
    :attr:`BimatrixEquilibria.degenerate`, never raised.

    :raise WrongFamily: For games without a bimatrix form.
    """
    if game.family not in (Family.GENERATED_BIMATRIX, Family.PRISONERS_DILEMMA):
        raise WrongFamily(game.family.value, Family.GENERATED_BIMATRIX.value)
    row, col = game.payoff_matrices()
    m, n = row.shape
    found = BimatrixEquilibria()
    seen = set()

    def visit(rows, cols):
        y = _check_support(row, rows, cols)
        x = _check_support(col.T, cols, rows)
        if isinstance(y, str) or isinstance(x, str):
            found.degenerate.append((tuple(rows), tuple(cols)))
            return
        if y is None or x is None:
            return
        full_x = np.zeros(m)
        full_x[list(rows)] = x[0]
        full_y = np.zeros(n)
        full_y[list(cols)] = y[0]
        if max_deviation_gain(row, col, full_x, full_y) > DEVIATION_TOLERANCE:
            return
        key = (tuple(np.round(full_x, 8)), tuple(np.round(full_y, 8)))
        if key in seen:
            return
        seen.add(key)
        found.profiles.append(_profile(game, full_x, full_y))

    pairs = _support_pairs(row, col)
    LOG.debug("Game %s: %d support pairs after dominance pruning", game.id, len(pairs))
    for rows, cols in pairs:
        visit(rows, cols)

    if found.degenerate:
        LOG.warning(
            "Game %s is degenerate: %d singular support pairs",
            game.id,
            len(found.degenerate),
        )
    if not found.profiles:
        LOG.error("Support enumeration found no equilibrium for %s", game.id)
        raise NoEquilibriumFound(game.id)
    return found


def _profile(game, x, y):
    out = []
    for role, probs in ((0, x), (1, y)):
        labels = game.action_space(role).labels
        nonzero = [(a, float(p)) for a, p in zip(labels, probs) if p > 0]
        if len(nonzero) == 1:
            out.append(Baseline(game.id, role, BaselineKind.POINT, NASH, point=nonzero[0][0]))
        else:
            out.append(
                Baseline(
                    game.id,
                    role,
                    BaselineKind.MIXED,
                    NASH,
                    support=tuple(labels),
                    weights=tuple(float(p) for p in probs),
                )
            )
    return tuple(out)


def fairness_rejection_threshold(P, alpha) -> float:
    """
    Offer below which an inequality-averse responder rejects.

    The responder's utility from accepting ``s`` is
    ``s - alpha * max(0, (P - s) - s)``; rejecting yields 0, so the
    threshold is ``alpha * P / (1 + 2 * alpha)``.
    """
    if not P > 0 or alpha < 0:
        raise InvalidParams(f"need P > 0 and alpha >= 0, got P={P}, alpha={alpha}")
    return alpha * P / (1 + 2 * alpha)


def literal_fairness_utility(s, P, alpha) -> float:
    """``pi + alpha * (fair_share - own_share)`` with shares of the pot."""
    return s + alpha * (0.5 - s / P)


def risk_averse_bid(v, n, rho) -> float:
    """First-price bid of a CRRA (x**rho) bidder with uniform values."""
    if not 0 < rho <= 1:
        raise InvalidRho(rho)
    if n < 2:
        raise InvalidParams(f"need n >= 2 bidders, got {n}")
    if v < 0:
        raise InvalidParams(f"value must be >= 0, got {v}")
    return v * (n - 1) / (n - 1 + rho)


def select_baseline(game, role, benchmark, grid_points=DEFAULT_GRID_POINTS) -> Baseline:
    """Baseline for an explicitly chosen benchmark."""
    kind = benchmark.kind
    if kind in (BenchmarkKind.NASH, BenchmarkKind.SPE):
        if game.family is Family.GENERATED_BIMATRIX:
            return solve_bimatrix_nash(game)[0][role]
        return closed_form_baseline(game, role, grid_points)
    if kind is BenchmarkKind.LEVEL_K:
        action = level_k_action(game, role, benchmark.k)
        return Baseline(game.id, role, BaselineKind.POINT, benchmark, point=action)
    if kind is BenchmarkKind.COGNITIVE_HIERARCHY:
        action = cognitive_hierarchy_action(game, role, benchmark.k, benchmark.tau)
        return Baseline(game.id, role, BaselineKind.POINT, benchmark, point=action)
    if kind is BenchmarkKind.LOGIT_QRE:
        profile = logit_qre(game, benchmark.lam, grid_points)
        if role not in profile:
            raise Unsupported(game.family.value, f"role {role} takes no action")
        return profile[role]
    raise InvalidParams(f"Unknown benchmark {benchmark}")


def baseline_to_dict(baseline) -> dict:
    data = {
        "game_id": baseline.game_id,
        "role": baseline.role,
        "kind": baseline.kind.value,
        "benchmark": str(baseline.benchmark),
    }
    if baseline.kind is BaselineKind.POINT:
        data["point"] = baseline.point
    else:
        data["support"] = list(baseline.support)
        data["weights"] = list(baseline.weights)
        if baseline.numeric:
            data["mean"] = baseline.mean()
    return data


def cooperation_probability(baseline) -> float:
    """Classical probability of cooperating in a binary cooperation game."""
    return baseline.probability(COOPERATE)
