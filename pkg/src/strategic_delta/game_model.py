"""
Game families, their parameters and normalized action spaces.

A :class:`GameSpec` is an immutable description of a canonical or generated
game. Every role has either a continuous action interval or a discrete set of
labels (``None`` for roles that take no action, like the dictator's
recipient). Decisions are compared across games on the unit interval
produced by :func:`normalize_action`.
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from . import LOG, SCHEMA_VERSION
from .exceptions import InvalidParams, InvalidShape, OutOfRange, Unsupported, WrongFamily
from .utils import stable_hash

__all__ = [
    "COOPERATE",
    "DEFECT",
    "Condition",
    "ContinuousInterval",
    "DiscreteSet",
    "Family",
    "Framing",
    "GameSpec",
    "Individuation",
    "canonical_games",
    "denormalize_action",
    "emit_certification_checklist",
    "game_from_dict",
    "game_to_dict",
    "generate_novel_game",
    "load_games",
    "make_game",
    "normalize_action",
    "save_games",
]

COOPERATE = "cooperate"
DEFECT = "defect"
MAX_GENERATED_DIM = 10
GENERATED_PAYOFF_RANGE = (-9, 9)
CERTIFICATION_CORPORA = (
    "Common Crawl",
    "arXiv",
    "Stack Exchange",
    "GitHub game-theory course repositories",
)
_SYLLABLES = (
    "ka", "ve", "lo", "tri", "mun", "sar", "qui", "dex", "bor", "fen",
    "ul", "zan", "pry", "oth", "gim", "wex",
)


class Family(str, Enum):
    DICTATOR = "Dictator"
    ULTIMATUM = "Ultimatum"
    TRUST = "Trust"
    PRISONERS_DILEMMA = "PrisonersDilemma"
    PUBLIC_GOODS = "PublicGoods"
    PBEAUTY = "PBeauty"
    FIRST_PRICE_AUCTION = "FirstPriceAuction"
    SECOND_PRICE_AUCTION = "SecondPriceAuction"
    ALL_PAY_AUCTION = "AllPayAuction"
    TULLOCK_CONTEST = "TullockContest"
    GENERATED_BIMATRIX = "GeneratedBimatrix"

    @classmethod
    def parse(cls, value):
        """Accept the canonical name or a loose alias such as ``pbeauty`` or ``pd``."""
        if isinstance(value, cls):
            return value
        key = str(value).replace("-", "").replace("_", "").replace(" ", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        if key in _FAMILY_ALIASES:
            return _FAMILY_ALIASES[key]
        raise InvalidParams(f"Unknown game family {value!r}")


_FAMILY_ALIASES = {
    "pd": Family.PRISONERS_DILEMMA,
    "prisoners": Family.PRISONERS_DILEMMA,
    "publicgood": Family.PUBLIC_GOODS,
    "beauty": Family.PBEAUTY,
    "firstprice": Family.FIRST_PRICE_AUCTION,
    "secondprice": Family.SECOND_PRICE_AUCTION,
    "allpay": Family.ALL_PAY_AUCTION,
    "tullock": Family.TULLOCK_CONTEST,
    "bimatrix": Family.GENERATED_BIMATRIX,
    "generated": Family.GENERATED_BIMATRIX,
}


class Individuation(str, Enum):
    NAMED = "Named"
    AGGREGATE = "Aggregate"


class Framing(str, Enum):
    GAIN = "Gain"
    LOSS = "Loss"
    NEUTRAL = "Neutral"


@dataclass(frozen=True)
class ContinuousInterval:
    lo: float
    hi: float

    def contains(self, y) -> bool:
        return self.lo <= y <= self.hi

    def __str__(self):
        return f"[{self.lo:g}, {self.hi:g}]"


@dataclass(frozen=True)
class DiscreteSet:
    labels: tuple

    def contains(self, y) -> bool:
        return isinstance(y, str) and y.lower() in self.lowered

    @property
    def lowered(self):
        return tuple(label.lower() for label in self.labels)

    @property
    def is_binary_cooperation(self) -> bool:
        return set(self.lowered) == {COOPERATE, DEFECT}

    def index(self, label) -> int:
        return self.lowered.index(label.lower())

    def __str__(self):
        return "{" + ", ".join(self.labels) + "}"


@dataclass(frozen=True)
class Condition:
    """Treatment metadata attached to every observed decision."""

    individuation: Individuation
    framing: Framing = Framing.NEUTRAL
    paraphrase_id: int = 0
    stake_scale: float = 1.0
    compute_budget: float = 0.0
    context_length: int = 0

    def __post_init__(self):
        object.__setattr__(self, "individuation", Individuation(self.individuation))
        object.__setattr__(self, "framing", Framing(self.framing))
        if self.paraphrase_id < 0:
            raise InvalidParams(f"paraphrase_id must be >= 0, got {self.paraphrase_id}")
        if not self.stake_scale > 0:
            raise InvalidParams(f"stake_scale must be positive, got {self.stake_scale}")
        if self.compute_budget < 0:
            raise InvalidParams(f"compute_budget must be >= 0, got {self.compute_budget}")
        if self.context_length < 0:
            raise InvalidParams(f"context_length must be >= 0, got {self.context_length}")

    @property
    def named(self) -> bool:
        return self.individuation is Individuation.NAMED

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["individuation"] = self.individuation.value
        data["framing"] = self.framing.value
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(
            individuation=Individuation(data["individuation"]),
            framing=Framing(data.get("framing", Framing.NEUTRAL.value)),
            paraphrase_id=int(data.get("paraphrase_id", 0)),
            stake_scale=float(data.get("stake_scale", 1.0)),
            compute_budget=float(data.get("compute_budget", 0.0)),
            context_length=int(data.get("context_length", 0)),
        )


@dataclass(frozen=True)
class GameSpec:
    id: str
    family: Family
    n_players: int
    rounds: int
    params: dict
    action_spaces: tuple = field(compare=False)
    name: str = ""

    def action_space(self, role):
        if not 0 <= role < len(self.action_spaces):
            raise InvalidParams(f"Game {self.id!r} has no role {role}")
        return self.action_spaces[role]

    @property
    def is_discrete(self) -> bool:
        return any(isinstance(s, DiscreteSet) for s in self.action_spaces)

    @property
    def acting_roles(self) -> tuple:
        return tuple(i for i, s in enumerate(self.action_spaces) if s is not None)

    @property
    def canonical(self) -> bool:
        return self.family is not Family.GENERATED_BIMATRIX

    def payoff_matrices(self):
        """Row and column payoff arrays for bimatrix-form games."""
        if self.family is Family.GENERATED_BIMATRIX:
            return (
                np.asarray(self.params["row_payoffs"], dtype=float),
                np.asarray(self.params["col_payoffs"], dtype=float),
            )
        if self.family is Family.PRISONERS_DILEMMA:
            t, r, p, s = (self.params[k] for k in ("T", "R", "P_pd", "S"))
            # rows/cols ordered (cooperate, defect)
            row = np.array([[r, s], [t, p]], dtype=float)
            return row, row.T.copy()
        raise Unsupported(self.family.value, "no bimatrix form")


def _positive(params, key, family):
    try:
        value = float(params[key])
    except KeyError as e:
        raise InvalidParams(f"{family.value} requires parameter {key}") from e
    if not math.isfinite(value) or value <= 0:
        raise InvalidParams(f"{family.value}: {key} must be positive, got {value}")
    return value


def _interval(hi, lo=0.0):
    return ContinuousInterval(float(lo), float(hi))


def _validate(family, params, n_players):
    """Return normalized params and the per-role action spaces."""
    p = dict(params)
    if family in (Family.DICTATOR, Family.ULTIMATUM, Family.TRUST):
        pot = _positive(p, "P", family)
        p["P"] = pot
        if family is Family.DICTATOR:
            return p, (_interval(pot), None)
        if family is Family.ULTIMATUM:
            unit = float(p.get("u", 1.0))
            if not 0 < unit <= pot:
                raise InvalidParams(f"Ultimatum: need 0 < u <= P, got u={unit}, P={pot}")
            p["u"] = unit
            return p, (_interval(pot), _interval(pot))
        multiplier = float(p.get("k", 3.0))
        if multiplier <= 0:
            raise InvalidParams(f"Trust: multiplier k must be positive, got {multiplier}")
        p["k"] = multiplier
        # the trustee chooses the share of the multiplied transfer to return
        return p, (_interval(pot), _interval(1.0))

    if family is Family.PRISONERS_DILEMMA:
        try:
            t, r, pun, s = (float(p[k]) for k in ("T", "R", "P_pd", "S"))
        except KeyError as e:
            raise InvalidParams(f"PrisonersDilemma requires T, R, P_pd, S; missing {e}") from e
        if not t > r:
            raise InvalidParams("T>R violated")
        if not r > pun:
            raise InvalidParams("R>P_pd violated")
        if not pun > s:
            raise InvalidParams("P_pd>S violated")
        p.update(T=t, R=r, P_pd=pun, S=s)
        labels = DiscreteSet((COOPERATE, DEFECT))
        return p, (labels,) * n_players

    if family is Family.PUBLIC_GOODS:
        endowment = _positive(p, "E", family)
        mpcr = float(p.get("m", 0))
        if not 0 < mpcr < 1:
            raise InvalidParams(f"PublicGoods: need 0 < m < 1, got {mpcr}")
        p.update(E=endowment, m=mpcr)
        return p, (_interval(endowment),) * n_players

    if family is Family.PBEAUTY:
        mult = float(p.get("p", 0))
        if not 0 < mult < 1:
            raise InvalidParams(f"PBeauty: need 0 < p < 1, got {mult}")
        upper = _positive(p, "H", family)
        p.update(p=mult, H=upper)
        return p, (_interval(upper),) * n_players

    if family is Family.FIRST_PRICE_AUCTION:
        v_hi = _positive(p, "v_hi", family)
        v_lo = float(p.get("v_lo", 0.0))
        value = _positive(p, "V", family)
        if not 0 <= v_lo < v_hi or not v_lo <= value <= v_hi:
            raise InvalidParams(
                f"FirstPriceAuction: need 0 <= v_lo <= V <= v_hi, got {v_lo}, {value}, {v_hi}"
            )
        p.update(V=value, v_lo=v_lo, v_hi=v_hi)
        return p, (_interval(v_hi),) * n_players

    if family in (Family.SECOND_PRICE_AUCTION, Family.ALL_PAY_AUCTION):
        value = _positive(p, "V", family)
        default_cap = 2 * value if family is Family.SECOND_PRICE_AUCTION else value
        cap = float(p.get("bid_cap", default_cap))
        if cap < value:
            raise InvalidParams(f"{family.value}: bid_cap must be >= V, got {cap}")
        p.update(V=value, bid_cap=cap)
        return p, (_interval(cap),) * n_players

    if family is Family.TULLOCK_CONTEST:
        value = _positive(p, "V", family)
        exponent = _positive(p, "r", family)
        p.update(V=value, r=exponent)
        return p, (_interval(value),) * n_players

    if family is Family.GENERATED_BIMATRIX:
        try:
            row = np.asarray(p["row_payoffs"], dtype=float)
            col = np.asarray(p["col_payoffs"], dtype=float)
        except KeyError as e:
            raise InvalidParams(f"GeneratedBimatrix requires {e}") from e
        if row.ndim != 2 or row.shape != col.shape:
            raise InvalidParams("GeneratedBimatrix payoff matrices must share a 2-D shape")
        if max(row.shape) > MAX_GENERATED_DIM:
            raise InvalidParams(f"GeneratedBimatrix shape {row.shape} exceeds 10x10")
        if not (np.isfinite(row).all() and np.isfinite(col).all()):
            raise InvalidParams("GeneratedBimatrix payoffs must be finite")
        if n_players != 2:
            raise InvalidParams("GeneratedBimatrix is a two-player game")
        p["row_payoffs"] = _freeze_matrix(p["row_payoffs"])
        p["col_payoffs"] = _freeze_matrix(p["col_payoffs"])
        rows, cols = row.shape
        row_labels = tuple(p.get("row_labels") or (f"r{i + 1}" for i in range(rows)))
        col_labels = tuple(p.get("col_labels") or (f"c{j + 1}" for j in range(cols)))
        if len(row_labels) != rows or len(col_labels) != cols:
            raise InvalidParams("GeneratedBimatrix label count does not match the shape")
        p["row_labels"], p["col_labels"] = row_labels, col_labels
        return p, (DiscreteSet(row_labels), DiscreteSet(col_labels))

    raise InvalidParams(f"Unknown family {family}")


def _freeze_matrix(matrix):
    return tuple(tuple(v.item() if hasattr(v, "item") else v for v in row) for row in matrix)


_DEFAULT_PLAYERS = {
    Family.PUBLIC_GOODS: 4,
    Family.PBEAUTY: 10,
}


def make_game(family, params, game_id=None, rounds=1, n_players=None, name="") -> GameSpec:
    """
    Build a validated :class:`GameSpec`.

    Example:
        >>> make_game("Ultimatum", {"P": 100, "u": 1}).action_space(0)
        ContinuousInterval(lo=0.0, hi=100.0)

    :param family: A :class:`Family` or one of its names/aliases.
    :param params: Family-specific parameter map.
    :param game_id: Identifier; defaults to the lower-case family name.
    :param rounds: Number of stage-game repetitions per session.
    :param n_players: Player count; two unless the family has another default.
    :param name: Display name.
    :raise InvalidParams: For any violated family invariant.
    """
    family = Family.parse(family)
    if n_players is None:
        n_players = _DEFAULT_PLAYERS.get(family, 2)
    n_players = int(n_players)
    if n_players < 2:
        raise InvalidParams(f"n_players must be >= 2, got {n_players}")
    if int(rounds) < 1:
        raise InvalidParams(f"rounds must be >= 1, got {rounds}")
    if family in (Family.DICTATOR, Family.ULTIMATUM, Family.TRUST) and n_players != 2:
        raise InvalidParams(f"{family.value} is a two-player game")
    clean, spaces = _validate(family, params, n_players)
    return GameSpec(
        id=game_id or family.value.lower(),
        family=family,
        n_players=n_players,
        rounds=int(rounds),
        params=clean,
        action_spaces=spaces,
        name=name,
    )


def normalize_action(game, role, y) -> float:
    """
    Map a decision to the unit interval.

    Continuous actions map affinely, ``(y - lo) / (hi - lo)``; binary
    cooperation games map cooperate to 1 and defect to 0.

    :raise OutOfRange: If ``y`` lies outside the role's action space.
    :raise Unsupported: For passive roles and non-binary discrete sets.
    """
    space = game.action_space(role)
    if space is None:
        raise Unsupported(game.family.value, f"role {role} takes no action")
    if isinstance(space, DiscreteSet):
        if not space.contains(y):
            raise OutOfRange(y, space)
        if not space.is_binary_cooperation:
            raise Unsupported(game.family.value, "non-binary discrete actions have no scale")
        return 1.0 if y.lower() == COOPERATE else 0.0
    try:
        value = float(y)
    except (TypeError, ValueError) as e:
        raise OutOfRange(y, space) from e
    if not space.contains(value):
        raise OutOfRange(y, space)
    return (value - space.lo) / (space.hi - space.lo)


def denormalize_action(game, role, u):
    """Inverse of :func:`normalize_action`."""
    space = game.action_space(role)
    if space is None:
        raise Unsupported(game.family.value, f"role {role} takes no action")
    if not 0.0 <= u <= 1.0:
        raise OutOfRange(u, "[0, 1]")
    if isinstance(space, DiscreteSet):
        if not space.is_binary_cooperation:
            raise Unsupported(game.family.value, "non-binary discrete actions have no scale")
        return COOPERATE if u >= 0.5 else DEFECT
    return space.lo + u * (space.hi - space.lo)


def _synthetic_name(seed, shape) -> str:
    digest = hashlib.sha256(f"novel:{seed}:{shape[0]}x{shape[1]}".encode()).digest()
    first = "".join(_SYLLABLES[b % len(_SYLLABLES)] for b in digest[:3])
    second = "".join(_SYLLABLES[b % len(_SYLLABLES)] for b in digest[3:5])
    return f"{first.capitalize()} {second.capitalize()}"


def generate_novel_game(seed, shape) -> GameSpec:
    """
    Generate a bimatrix game with integer payoffs in [-9, 9].

    The result is a pure function of ``(seed, shape)``.

    :raise InvalidShape: Unless 2 <= rows, cols <= 10.
    """
    try:
        rows, cols = (int(d) for d in shape)
    except (TypeError, ValueError) as e:
        raise InvalidShape(shape) from e
    if not (2 <= rows <= MAX_GENERATED_DIM and 2 <= cols <= MAX_GENERATED_DIM):
        raise InvalidShape(shape)
    rng = np.random.default_rng(seed)
    lo, hi = GENERATED_PAYOFF_RANGE
    row = rng.integers(lo, hi + 1, size=(rows, cols))
    col = rng.integers(lo, hi + 1, size=(rows, cols))
    name = _synthetic_name(seed, (rows, cols))
    stem = name.split()[0][:3].lower()
    return make_game(
        Family.GENERATED_BIMATRIX,
        {
            "row_payoffs": row.tolist(),
            "col_payoffs": col.tolist(),
            "row_labels": [f"{stem}-{i + 1}" for i in range(rows)],
            "col_labels": [f"{stem}-{chr(ord('a') + j)}" for j in range(cols)],
            "seed": int(seed),
        },
        game_id=f"gen-{seed}-{rows}x{cols}",
        name=name,
    )


def payoff_hash(game) -> str:
    return stable_hash(
        {"row": game.params["row_payoffs"], "col": game.params["col_payoffs"]}
    )


def emit_certification_checklist(game) -> dict:
    """
    Build the pre-commitment checklist for a generated game.

    The checklist lists the corpora to search for the payoff structure and
    naming; the search itself and the signature are left to the analyst.

    :raise WrongFamily: For canonical games.
    """
    if game.family is not Family.GENERATED_BIMATRIX:
        raise WrongFamily(game.family.value, Family.GENERATED_BIMATRIX.value)
    digest = payoff_hash(game)
    LOG.info("Certification checklist for %s (payoff hash %s)", game.id, digest[:12])
    return {
        "schema_version": SCHEMA_VERSION,
        "game_id": game.id,
        "synthetic_name": game.name,
        "payoff_hash": digest,
        "action_labels": {
            "row": list(game.params["row_labels"]),
            "col": list(game.params["col_labels"]),
        },
        "corpora": [
            {
                "corpus": corpus,
                "queries": [game.name, digest[:16]],
                "searched": False,
                "hits": None,
            }
            for corpus in CERTIFICATION_CORPORA
        ],
        "attestation": {
            "statement": (
                "The payoff structure and naming of this game were searched for in "
                "every listed corpus before any model was queried, and no match was found."
            ),
            "signed_by": None,
            "signed_at": None,
        },
    }


def game_to_dict(game) -> dict:
    params = {}
    for key, value in game.params.items():
        params[key] = [list(row) for row in value] if key.endswith("_payoffs") else (
            list(value) if isinstance(value, tuple) else value
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "family": game.family.value,
        "id": game.id,
        "name": game.name,
        "n_players": game.n_players,
        "rounds": game.rounds,
        "params": params,
    }


def game_from_dict(data) -> GameSpec:
    if "family" not in data:
        raise InvalidParams("Game object lacks the 'family' discriminator")
    return make_game(
        data["family"],
        data.get("params", {}),
        game_id=data.get("id"),
        rounds=data.get("rounds", 1),
        n_players=data.get("n_players"),
        name=data.get("name", ""),
    )


def save_games(path, games):
    with open(path, "w", encoding="utf8") as fp:
        json.dump(
            {"schema_version": SCHEMA_VERSION, "games": [game_to_dict(g) for g in games]},
            fp,
            indent=2,
            sort_keys=True,
        )
        fp.write("\n")


def load_games(path) -> dict:
    """Read a sidecar game file and return games keyed by id."""
    with open(path, encoding="utf8") as fp:
        data = json.load(fp)
    entries = data["games"] if isinstance(data, dict) else data
    return {g.id: g for g in (game_from_dict(entry) for entry in entries)}


def canonical_games(rounds=1) -> dict:
    """Default-parameter catalogue, one game per canonical family, keyed by id."""
    specs = [
        make_game(Family.DICTATOR, {"P": 100}, "dictator", rounds),
        make_game(Family.ULTIMATUM, {"P": 100, "u": 1}, "ultimatum", rounds),
        make_game(Family.TRUST, {"P": 100, "k": 3}, "trust", rounds),
        make_game(
            Family.PRISONERS_DILEMMA, {"T": 5, "R": 3, "P_pd": 1, "S": 0}, "pd", rounds
        ),
        make_game(Family.PUBLIC_GOODS, {"E": 20, "m": 0.4}, "public-goods", rounds),
        make_game(Family.PBEAUTY, {"p": 2 / 3, "H": 100}, "pbeauty", rounds),
        make_game(
            Family.FIRST_PRICE_AUCTION, {"V": 80, "v_hi": 100}, "first-price", rounds
        ),
        make_game(Family.SECOND_PRICE_AUCTION, {"V": 73}, "second-price", rounds),
        make_game(Family.ALL_PAY_AUCTION, {"V": 100}, "all-pay", rounds),
        make_game(Family.TULLOCK_CONTEST, {"V": 100, "r": 1}, "tullock", rounds),
    ]
    return {g.id: g for g in specs}
