"""
Behavioural residuals: observed play minus the classical baseline.

Everything happens on the normalized action scale, so |delta| <= 1 and
residuals from different games can be pooled.
"""

from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import pandas as pd

from . import LOG
from .exceptions import (
    BaselineMissing,
    BlockTooSmall,
    DegeneratePool,
    TooFewObservations,
    UnknownGame,
)
from .game_model import COOPERATE, Condition, DiscreteSet, normalize_action

__all__ = [
    "Arm",
    "DeltaSeries",
    "Pooling",
    "RoundRecord",
    "block_delta_discrete",
    "compute_delta",
    "delta_series",
    "deltas_to_frame",
    "drop_incomplete_sessions",
    "opponent_role",
    "standardize_deltas",
    "write_delta_csv",
]

MIN_BLOCK_SIZE = 5
DEFAULT_BLOCK_SIZE = 5


class Arm(str, Enum):
    HUMAN = "Human"
    LLM = "LLM"
    SYNTHETIC = "Synthetic"


class Pooling(str, Enum):
    PER_GAME = "PerGame"
    GLOBAL = "Global"


@dataclass(frozen=True)
class RoundRecord:
    """One observed decision."""

    session_id: str
    subject_id: str
    game_id: str
    role: int
    round: int
    condition: Condition
    decision: object
    opponent_decision: object = None
    arm: Arm = Arm.SYNTHETIC


@dataclass
class DeltaSeries:
    """
    Ordered residuals of one subject in one session.

    ``decisions`` and ``opponent`` hold the normalized own and opponent
    play behind each residual (block rates for discrete games); opponent
    entries are NaN when the game has no observable opponent action.
    Discrete series also keep the per-round play in ``round_decisions``
    and ``round_opponent``.
    """

    session_id: str
    subject_id: str
    game_id: str
    role: int
    condition: Condition
    values: np.ndarray
    decisions: np.ndarray
    opponent: np.ndarray
    arm: Arm = Arm.SYNTHETIC
    block_size: int = None
    family: str = ""
    scale: float = 1.0
    index: tuple = field(default=())
    round_decisions: np.ndarray = None
    round_opponent: np.ndarray = None

    def __len__(self):
        return len(self.values)

    @property
    def play(self):
        """Round-level ``(own, opponent)`` normalized decisions."""
        if self.round_decisions is None:
            return self.decisions, self.opponent
        return self.round_decisions, self.round_opponent

    @property
    def key(self):
        return (self.session_id, self.subject_id, self.game_id, self.role)


def opponent_role(game, role):
    """Role whose decisions a player observes, or None."""
    if len(game.action_spaces) == 2:
        other = 1 - role
        return other if game.action_space(other) is not None else None
    return role


def compute_delta(record, baseline, game) -> float:
    """
    Residual of one decision: ``normalize(decision) - normalize(baseline)``.

    Mixed baselines are compared through their mean.

    :raise BaselineMissing: If ``baseline`` is None or belongs to another game/role.
    :raise OutOfRange: If the decision lies outside the action space.
    """
    if baseline is None or baseline.game_id != record.game_id or baseline.role != record.role:
        raise BaselineMissing(record.game_id, record.role)
    return normalize_action(game, record.role, record.decision) - baseline.normalized(game)


def _normalized_opponent(game, role, value):
    other = opponent_role(game, role)
    if other is None or value is None:
        return np.nan
    if isinstance(value, float) and np.isnan(value):
        return np.nan
    return normalize_action(game, other, value)


def _group(records):
    groups = defaultdict(list)
    for r in records:
        groups[(r.session_id, r.subject_id, r.game_id, r.role)].append(r)
    for rows in groups.values():
        rows.sort(key=lambda r: r.round)
    return groups


def block_delta_discrete(records, baseline, game, block_size=DEFAULT_BLOCK_SIZE) -> list:
    """
    Block residuals for a binary cooperation game.

    Each (session, subject) run of records is cut into consecutive blocks of
    ``block_size`` rounds; delta per block is the cooperation rate minus the
    classical cooperation probability. A trailing partial block is dropped.

    :return: One :class:`DeltaSeries` per (session, subject).
    :raise BlockTooSmall: If ``block_size`` is below 5.
    """
    if block_size < MIN_BLOCK_SIZE:
        raise BlockTooSmall(block_size, MIN_BLOCK_SIZE)
    out = []
    partial = 0
    for (session, subject, game_id, role), rows in _group(records).items():
        if baseline is None or baseline.game_id != game_id or baseline.role != role:
            raise BaselineMissing(game_id, role)
        classical = baseline.probability(COOPERATE)
        coop = np.array([normalize_action(game, role, r.decision) for r in rows])
        opp = np.array([_normalized_opponent(game, role, r.opponent_decision) for r in rows])
        n_blocks = len(rows) // block_size
        partial += len(rows) % block_size > 0
        if n_blocks == 0:
            continue
        cut = n_blocks * block_size
        rates = coop[:cut].reshape(n_blocks, block_size).mean(axis=1)
        opp_rates = opp[:cut].reshape(n_blocks, block_size).mean(axis=1)
        out.append(
            DeltaSeries(
                session_id=session,
                subject_id=subject,
                game_id=game_id,
                role=role,
                condition=rows[0].condition,
                values=rates - classical,
                decisions=rates,
                opponent=opp_rates,
                arm=rows[0].arm,
                block_size=block_size,
                family=game.family.value,
                index=tuple(range(1, n_blocks + 1)),
                round_decisions=coop,
                round_opponent=opp,
            )
        )
    if partial:
        LOG.warning("Dropped a partial trailing block in %d series", partial)
    return out


def standardize_deltas(series_collection, pooling=Pooling.PER_GAME) -> list:
    """
    Divide every residual by the standard deviation of its pool.

    Pool means are not subtracted.

    :raise TooFewObservations: If a pool holds fewer than 2 residuals.
    :raise DegeneratePool: If a pool has zero variance.
    """
    pooling = Pooling(pooling)
    pools = defaultdict(list)
    for s in series_collection:
        key = s.game_id if pooling is Pooling.PER_GAME else "global"
        pools[key].append(s.values)
    scales = {}
    for key, parts in pools.items():
        values = np.concatenate(parts) if parts else np.empty(0)
        if len(values) < 2:
            raise TooFewObservations(len(values), 2)
        sd = float(np.std(values, ddof=1))
        if sd == 0:
            raise DegeneratePool(key)
        scales[key] = sd
    out = []
    for s in series_collection:
        sd = scales[s.game_id if pooling is Pooling.PER_GAME else "global"]
        out.append(replace(s, values=s.values / sd, scale=s.scale * sd))
    return out


def drop_incomplete_sessions(records, games):
    """
    Keep only sessions whose rounds run 1..game.rounds for every subject.

    :return: ``(kept_records, dropped_session_ids)``
    """
    by_session = defaultdict(list)
    for r in records:
        by_session[r.session_id].append(r)
    kept, dropped = [], []
    for session, rows in by_session.items():
        complete = True
        for (_, _, game_id, _), group in _group(rows).items():
            if game_id not in games:
                raise UnknownGame(game_id)
            rounds = [r.round for r in group]
            if rounds != list(range(1, games[game_id].rounds + 1)):
                complete = False
                break
        if complete:
            kept.extend(rows)
        else:
            dropped.append(session)
    if dropped:
        LOG.warning("Dropped %d incomplete sessions", len(dropped))
    return kept, dropped


def delta_series(records, games, baselines, block_size=DEFAULT_BLOCK_SIZE) -> list:
    """
    Residual series for every (session, subject, game, role).

    :param games: Mapping game id -> GameSpec.
    :param baselines: Mapping ``(game_id, role)`` -> Baseline.
    """
    by_game_role = defaultdict(list)
    for r in records:
        by_game_role[(r.game_id, r.role)].append(r)

    out = []
    for (game_id, role), rows in sorted(by_game_role.items()):
        if game_id not in games:
            raise UnknownGame(game_id)
        game = games[game_id]
        baseline = baselines.get((game_id, role))
        if baseline is None:
            raise BaselineMissing(game_id, role)
        space = game.action_space(role)
        if isinstance(space, DiscreteSet):
            out.extend(block_delta_discrete(rows, baseline, game, block_size))
            continue
        for (session, subject, _, _), group in _group(rows).items():
            out.append(
                DeltaSeries(
                    session_id=session,
                    subject_id=subject,
                    game_id=game_id,
                    role=role,
                    condition=group[0].condition,
                    values=np.array([compute_delta(r, baseline, game) for r in group]),
                    decisions=np.array([normalize_action(game, role, r.decision) for r in group]),
                    opponent=np.array(
                        [_normalized_opponent(game, role, r.opponent_decision) for r in group]
                    ),
                    arm=group[0].arm,
                    family=game.family.value,
                    index=tuple(r.round for r in group),
                )
            )
    LOG.debug("Built %d delta series from %d records", len(out), len(records))
    return out


def deltas_to_frame(series) -> pd.DataFrame:
    """Tidy table: one row per residual with its condition fields."""
    rows = []
    for s in series:
        cond = s.condition.to_dict()
        for i, value in enumerate(s.values):
            rows.append(
                {
                    "session_id": s.session_id,
                    "subject_id": s.subject_id,
                    "game_id": s.game_id,
                    "family": s.family,
                    "role": s.role,
                    "index": s.index[i] if i < len(s.index) else i + 1,
                    "block_size": s.block_size or 1,
                    **cond,
                    "arm": s.arm.value,
                    "delta": float(value),
                }
            )
    columns = [
        "session_id",
        "subject_id",
        "game_id",
        "family",
        "role",
        "index",
        "block_size",
        "individuation",
        "framing",
        "paraphrase_id",
        "stake_scale",
        "compute_budget",
        "context_length",
        "arm",
        "delta",
    ]
    return pd.DataFrame(rows, columns=columns)


def write_delta_csv(path, series):
    deltas_to_frame(series).to_csv(path, index=False, float_format="%.12g")
    LOG.info("Wrote %d delta series to %s", len(series), path)
