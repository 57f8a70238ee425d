"""
Synthetic decision-makers with known residual structure.

Agents act on the normalized action scale around the classical baseline:

- ``Classical`` adds Gaussian noise only.
- ``BoundedHuman`` adds a fairness pull, imitation of lagged peer play,
  anchoring, an individuation multiplier and frame-skewed noise.
- ``Retrieval`` adds a fixed offset keyed by the prompt paraphrase.
- ``Reasoning`` plays level-k with k capped by the compute budget.
- ``Scripted`` always plays a configured action.

Sessions and experiments are deterministic given the master seed.
"""

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from functools import lru_cache
from itertools import product

import numpy as np

from . import LOG
from .baselines import (
    Baseline,
    BaselineKind,
    closed_form_baseline,
    level_k_action,
    solve_bimatrix_nash,
)
from .dataset import Dataset
from .exceptions import (
    EmptyDesign,
    InvalidParams,
    OutOfRange,
    RoleMismatch,
    StrategicDeltaError,
    UnsupportedGameForKind,
)
from .game_model import (
    Condition,
    DiscreteSet,
    Family,
    Framing,
    Individuation,
    canonical_games,
    denormalize_action,
    game_from_dict,
    make_game,
    normalize_action,
)
from .residuals import Arm, RoundRecord
from .utils import derive_seed, load_config, substream

__all__ = [
    "AgentConfig",
    "AgentKind",
    "ExperimentDesign",
    "RoundState",
    "Session",
    "act",
    "agent_baseline",
    "cross_conditions",
    "draw_subject",
    "fairness_target",
    "load_design",
    "paraphrase_offset",
    "run_experiment",
    "run_session",
]

DEFAULT_SPREAD = 0.2
FAIRNESS_FAMILIES = (
    Family.DICTATOR,
    Family.ULTIMATUM,
    Family.TRUST,
    Family.PRISONERS_DILEMMA,
    Family.PUBLIC_GOODS,
)
ROLE_ASYMMETRIC = (
    Family.DICTATOR,
    Family.ULTIMATUM,
    Family.TRUST,
    Family.GENERATED_BIMATRIX,
)
LEVEL_CACHE_SIZE = 256


class AgentKind(str, Enum):
    CLASSICAL = "Classical"
    BOUNDED_HUMAN = "BoundedHuman"
    RETRIEVAL = "Retrieval"
    REASONING = "Reasoning"
    SCRIPTED = "Scripted"


@dataclass(frozen=True)
class AgentConfig:
    kind: AgentKind
    noise_sd: float = 0.0
    fairness_alpha: float = 0.0
    loss_aversion: float = 1.0
    imitation_weight: float = 0.0
    anchor_weight: float = 0.0
    anchor: float = 0.5
    individuation_gamma: float = 0.0
    paraphrase_amplitude: float = 0.0
    k_max: int = 0
    unit_cost: float = 1.0
    action: object = None

    def __post_init__(self):
        object.__setattr__(self, "kind", AgentKind(self.kind))
        if self.noise_sd < 0:
            raise InvalidParams(f"noise_sd must be >= 0, got {self.noise_sd}")
        if self.fairness_alpha < 0:
            raise InvalidParams(f"fairness_alpha must be >= 0, got {self.fairness_alpha}")
        if self.loss_aversion < 1:
            raise InvalidParams(f"loss_aversion must be >= 1, got {self.loss_aversion}")
        for name in ("imitation_weight", "anchor_weight"):
            if not 0 <= getattr(self, name) < 1:
                raise InvalidParams(f"{name} must lie in [0, 1), got {getattr(self, name)}")
        if not 0 <= self.anchor <= 1:
            raise InvalidParams(f"anchor is a normalized point in [0, 1], got {self.anchor}")
        if self.individuation_gamma < 0 or self.paraphrase_amplitude < 0:
            raise InvalidParams("individuation_gamma and paraphrase_amplitude must be >= 0")
        if self.k_max < 0 or not self.unit_cost > 0:
            raise InvalidParams("need k_max >= 0 and unit_cost > 0")
        if self.kind is AgentKind.SCRIPTED and self.action is None:
            raise InvalidParams("Scripted agents need an action")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["kind"] = self.kind.value
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass
class RoundState:
    """What an agent sees before deciding: 1-based round and past play."""

    round: int = 1
    own: list = field(default_factory=list)
    opponent: list = field(default_factory=list)
    peer: list = field(default_factory=list)

    def validate(self):
        if self.round < 1 or len(self.own) != self.round - 1:
            raise UnsupportedGameForKind(
                f"Round state for round {self.round} carries {len(self.own)} past decisions"
            )


@dataclass
class Session:
    session_id: str
    game_id: str
    condition: Condition
    records: list


def paraphrase_offset(paraphrase_id) -> float:
    """Deterministic hash of a paraphrase id onto [-1, 1]."""
    digest = hashlib.sha256(f"paraphrase:{paraphrase_id}".encode()).hexdigest()
    return int(digest[:8], 16) / 0xFFFFFFFF * 2 - 1


def fairness_target(game, alpha) -> float:
    """Normalized point the fairness pull moves toward: ``alpha / (1 + 2 alpha)``."""
    if game.family not in FAIRNESS_FAMILIES or alpha == 0:
        return None
    return alpha / (1 + 2 * alpha)


def agent_baseline(game, role) -> Baseline:
    """Classical reference point agents perturb."""
    if game.family is Family.GENERATED_BIMATRIX:
        return solve_bimatrix_nash(game)[0][role]
    return closed_form_baseline(game, role)


def _level_k(game, role, k):
    key = json.dumps([game.family.value, game.n_players, game.params], sort_keys=True, default=str)
    return _cached_level_k(key, role, k)


@lru_cache(maxsize=LEVEL_CACHE_SIZE)
def _cached_level_k(key, role, k):
    family, n_players, params = json.loads(key)
    return level_k_action(make_game(family, params, n_players=n_players), role, k)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _emit(game, role, u, rng):
    """Turn a normalized latent value into a decision."""
    space = game.action_space(role)
    u = min(1.0, max(0.0, u))
    if isinstance(space, DiscreteSet):
        return denormalize_action(game, role, 1.0 if rng.random() < u else 0.0)
    return denormalize_action(game, role, u)


def _play_baseline(game, role, baseline, rng):
    if baseline.kind is BaselineKind.POINT:
        return baseline.point
    if baseline.numeric:
        return baseline.mean()
    return baseline.support[rng.choice(len(baseline.support), p=np.asarray(baseline.weights))]


def _skewed_noise(agent, condition, rng):
    """
    Gaussian noise with one tail stretched by ``loss_aversion``.

    Under Loss the positive draws are stretched, under Gain the negative
    ones, so the residual skews right in loss frames and left in gain
    frames as :func:`~strategic_delta.signatures.predicted_direction`
    expects.
    """
    e = rng.normal(0.0, agent.noise_sd) if agent.noise_sd > 0 else 0.0
    framing = Framing(condition.framing)
    if framing is Framing.LOSS and e > 0:
        e *= agent.loss_aversion
    elif framing is Framing.GAIN and e < 0:
        e *= agent.loss_aversion
    return e


def act(agent, game, role, round_state, condition, seed, baseline=None):
    """
    One decision of ``agent`` in ``role`` of ``game``.

    :param round_state: :class:`RoundState` with past own/opponent/peer play.
    :param condition: Treatment :class:`Condition`.
    :param seed: Integer seed or a numpy Generator.
    :param baseline: Precomputed classical baseline for the role.
    :return: A decision in the role's action space (raw units or a label).
    :raise UnsupportedGameForKind: On malformed round state, or for
        behavioural kinds on discrete games without a cooperation scale.
    """
    round_state.validate()
    rng = _rng(seed)
    space = game.action_space(role)
    if space is None:
        raise UnsupportedGameForKind(f"Role {role} of {game.id} takes no action")

    if agent.kind is AgentKind.SCRIPTED:
        if not space.contains(agent.action):
            raise OutOfRange(agent.action, space)
        return agent.action

    baseline = baseline or agent_baseline(game, role)
    scaled = not isinstance(space, DiscreteSet) or space.is_binary_cooperation

    if agent.kind is AgentKind.REASONING:
        k = min(agent.k_max, math.floor(condition.compute_budget / agent.unit_cost))
        try:
            action = _level_k(game, role, k)
        except StrategicDeltaError as e:
            LOG.debug("Reasoning agent falls back to the baseline on %s: %s", game.id, e)
            action = _play_baseline(game, role, baseline, rng)
        if agent.noise_sd == 0 or not scaled:
            return action
        return _emit(game, role, normalize_action(game, role, action) + rng.normal(0, agent.noise_sd), rng)

    if not scaled:
        if agent.kind is AgentKind.CLASSICAL:
            return _play_baseline(game, role, baseline, rng)
        raise UnsupportedGameForKind(f"{agent.kind.value} agents need a scaled action space, {game.id} has none")

    b = baseline.normalized(game)
    if agent.kind is AgentKind.CLASSICAL:
        if agent.noise_sd == 0 and not isinstance(space, DiscreteSet):
            return _play_baseline(game, role, baseline, rng)
        return _emit(game, role, b + (rng.normal(0, agent.noise_sd) if agent.noise_sd else 0.0), rng)

    if agent.kind is AgentKind.RETRIEVAL:
        offset = agent.paraphrase_amplitude * paraphrase_offset(condition.paraphrase_id)
        noise = rng.normal(0, agent.noise_sd) if agent.noise_sd else 0.0
        return _emit(game, role, b + offset + noise, rng)

    # BoundedHuman
    systematic = 0.0
    target = fairness_target(game, agent.fairness_alpha)
    if target is not None:
        systematic += target - b
    if agent.imitation_weight and round_state.peer:
        systematic += agent.imitation_weight * (round_state.peer[-1] - b)
    if agent.anchor_weight:
        systematic += agent.anchor_weight * (agent.anchor - b)
    multiplier = 1 + agent.individuation_gamma * condition.named
    u = b + multiplier * systematic + _skewed_noise(agent, condition, rng)
    return _emit(game, role, u, rng)


def draw_subject(agent, rng, spread=DEFAULT_SPREAD) -> AgentConfig:
    """Subject-level parameters drawn uniformly within +-spread of the configured means."""
    if spread == 0 or agent.kind in (AgentKind.SCRIPTED, AgentKind.CLASSICAL):
        return agent

    def jitter(value):
        return value * rng.uniform(1 - spread, 1 + spread)

    changes = {
        "noise_sd": jitter(agent.noise_sd),
        "fairness_alpha": jitter(agent.fairness_alpha),
        "loss_aversion": 1 + jitter(agent.loss_aversion - 1),
        "imitation_weight": min(jitter(agent.imitation_weight), 0.99),
        "anchor_weight": min(jitter(agent.anchor_weight), 0.99),
        "individuation_gamma": jitter(agent.individuation_gamma),
        "paraphrase_amplitude": jitter(agent.paraphrase_amplitude),
    }
    return replace(agent, **changes)


def _peer_value(game, role, decisions):
    """
    Normalized play the agent imitates next round.

    In symmetric games this is the mean of the other players' decisions.
    Role-asymmetric games have no peer in the same role, so the signal is
    the agent's own last decision and imitation acts as own-role
    persistence there.
    """
    others = [r for r in decisions if r != role]
    if game.family in ROLE_ASYMMETRIC or not others:
        return normalize_action(game, role, decisions[role])
    return float(np.mean([normalize_action(game, r, decisions[r]) for r in others]))


def _opponent_decision(game, role, decisions):
    others = [decisions[r] for r in decisions if r != role]
    if not others:
        return None
    if len(others) == 1:
        return others[0]
    return float(np.mean(others))


def run_session(
    game,
    agent_configs,
    rounds=None,
    condition=None,
    seed=0,
    session_id="session-0",
    subject_ids=None,
    arm=Arm.SYNTHETIC,
) -> Session:
    """
    Play ``game`` for ``rounds`` rounds with one agent per acting role.

    :raise RoleMismatch: Unless there is exactly one agent per acting role.
    """
    roles = game.acting_roles
    agent_configs = list(agent_configs)
    if len(agent_configs) != len(roles):
        raise RoleMismatch(len(agent_configs), len(roles))
    rounds = rounds or game.rounds
    if rounds < 1:
        raise InvalidParams(f"rounds must be >= 1, got {rounds}")
    condition = condition or Condition(Individuation.AGGREGATE)
    subject_ids = subject_ids or [f"{session_id}-r{r}" for r in roles]
    baselines = {r: agent_baseline(game, r) for r in roles if agent_configs[roles.index(r)].kind is not AgentKind.SCRIPTED}
    states = {r: RoundState() for r in roles}
    records = []
    for t in range(1, rounds + 1):
        decisions = {}
        for r, agent in zip(roles, agent_configs):
            states[r].round = t
            decisions[r] = act(agent, game, r, states[r], condition, substream(seed, t, r), baselines.get(r))
        for i, r in enumerate(roles):
            opponent = _opponent_decision(game, r, decisions)
            records.append(
                RoundRecord(
                    session_id=session_id,
                    subject_id=subject_ids[i],
                    game_id=game.id,
                    role=r,
                    round=t,
                    condition=condition,
                    decision=decisions[r],
                    opponent_decision=opponent,
                    arm=arm,
                )
            )
            states[r].own.append(decisions[r])
            states[r].opponent.append(opponent)
            scaled = not game.is_discrete or game.action_space(r).is_binary_cooperation
            states[r].peer.append(_peer_value(game, r, decisions) if scaled else None)
    return Session(session_id=session_id, game_id=game.id, condition=condition, records=records)


def cross_conditions(
    individuation=(Individuation.NAMED, Individuation.AGGREGATE),
    framing=(Framing.NEUTRAL,),
    paraphrase_ids=(0,),
    compute_budgets=(0.0,),
    stake_scales=(1.0,),
    context_lengths=(0,),
) -> list:
    """Full factorial of condition levels."""
    return [
        Condition(i, f, p, s, b, c)
        for i, f, p, b, s, c in product(
            individuation, framing, paraphrase_ids, compute_budgets, stake_scales, context_lengths
        )
    ]


@dataclass
class ExperimentDesign:
    """
    Games x conditions x arms x sessions.

    ``arms`` maps an arm label to the agent configs, one per acting role.
    Subject ``s`` of an arm keeps its id and drawn parameters across
    games and conditions.
    """

    games: list
    conditions: list
    arms: dict
    sessions_per_cell: int
    seed: int
    rounds: int = None
    spread: float = DEFAULT_SPREAD
    workers: int = 1
    ordering: list = None


def _cells(design):
    for g, game in enumerate(design.games):
        for c, condition in enumerate(design.conditions):
            for a, (label, agents) in enumerate(sorted(design.arms.items())):
                for s in range(design.sessions_per_cell):
                    yield g, game, c, condition, a, label, agents, s


def run_experiment(design) -> Dataset:
    """
    Run every cell of an experiment design.

    :raise EmptyDesign: If games, conditions, arms or sessions are empty.
    """
    if not design.games or not design.conditions or not design.arms or design.sessions_per_cell < 1:
        raise EmptyDesign("Experiment design has an empty factor")

    def one(cell):
        g, game, c, condition, a, label, agents, s = cell
        subjects = [
            draw_subject(agent, substream(design.seed, a, s, r), design.spread)
            for r, agent in zip(game.acting_roles, agents)
        ]
        session = run_session(
            game,
            subjects,
            rounds=design.rounds or game.rounds,
            condition=condition,
            seed=derive_seed(design.seed, g, c, a, s),
            session_id=f"{game.id}-c{c}-{label}-{s}",
            subject_ids=[f"{label}-{s:03d}-r{r}" for r in game.acting_roles],
        )
        return session.records

    if design.rounds:
        design = replace(design, games=[replace(g, rounds=int(design.rounds)) for g in design.games])
    cells = list(_cells(design))
    if design.workers > 1:
        with ThreadPoolExecutor(max_workers=design.workers) as pool:
            parts = list(pool.map(one, cells))
    else:
        parts = [one(cell) for cell in cells]
    records = [r for part in parts for r in part]
    LOG.info("Simulated %d sessions (%d records), seed %d", len(cells), len(records), design.seed)
    return Dataset(
        records=records,
        games={g.id: g for g in design.games},
        generator="strategic-delta simulate",
        seed=design.seed,
    )


def _design_games(entries):
    catalogue = canonical_games()
    games = []
    for entry in entries:
        if isinstance(entry, str):
            if entry not in catalogue:
                raise InvalidParams(f"Unknown canonical game {entry!r}")
            games.append(catalogue[entry])
        else:
            games.append(game_from_dict(entry))
    return games


def design_from_dict(data) -> ExperimentDesign:
    conditions = data.get("conditions", {})
    if isinstance(conditions, list):
        conditions = [Condition.from_dict(c) for c in conditions]
    else:
        conditions = cross_conditions(
            individuation=conditions.get("individuation", ["Named", "Aggregate"]),
            framing=conditions.get("framing", ["Neutral"]),
            paraphrase_ids=conditions.get("paraphrase_ids", [0]),
            compute_budgets=conditions.get("compute_budgets", [0.0]),
            stake_scales=conditions.get("stake_scales", [1.0]),
            context_lengths=conditions.get("context_lengths", [0]),
        )
    games = _design_games(data.get("games", []))
    if data.get("rounds"):
        games = [replace(g, rounds=int(data["rounds"])) for g in games]
    arms = {
        label: [AgentConfig.from_dict(a) for a in agents]
        for label, agents in data.get("arms", {}).items()
    }
    return ExperimentDesign(
        games=games,
        conditions=conditions,
        arms=arms,
        sessions_per_cell=int(data.get("sessions_per_cell", 1)),
        seed=int(data.get("seed", 0)),
        rounds=data.get("rounds"),
        spread=float(data.get("spread", DEFAULT_SPREAD)),
        workers=int(data.get("workers", 1)),
        ordering=data.get("ordering"),
    )


def load_design(path) -> ExperimentDesign:
    """Read a JSON (or YAML) experiment design."""
    return design_from_dict(load_config(path))
