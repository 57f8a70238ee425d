"""
Prompting a chat-completion endpoint and turning its answers into decisions.

Prompts come from a packaged bank of vetted paraphrases
(``data/prompts.yaml``). Transport runs in one of three modes:

- ``Live`` posts to the endpoint and returns the text.
- ``Record`` does the same and appends the exchange to a transcript store.
- ``Replay`` answers from the transcript store and never opens a connection.

Everything downstream of the transcript store is deterministic, so a
replayed run rebuilds the same dataset byte for byte.
"""

import json
import math
import os
import re
import string
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from functools import lru_cache
from importlib.resources import files
from pathlib import Path

import requests
import yaml

from . import LOG
from .dataset import Dataset
from .exceptions import (
    AuthMissing,
    EmptyDesign,
    InvalidParams,
    MissingSlot,
    NetworkError,
    OutOfRange,
    ReplayMiss,
    TooFewParaphrases,
    Unparseable,
    WrongFamily,
)
from .game_model import DiscreteSet, Family, Individuation
from .residuals import Arm, RoundRecord
from .utils import call_with_retries, derive_seed, load_config, stable_hash

__all__ = [
    "EndpointConfig",
    "PromptBank",
    "PromptTemplate",
    "Transcript",
    "TranscriptStore",
    "TransportMode",
    "exchange",
    "invitation_lint",
    "lint_template",
    "load_endpoint_config",
    "load_prompt_bank",
    "parse_decision",
    "prompt_hash",
    "query_agent",
    "render_decision",
    "render_prompt",
    "run_llm_design",
]

MIN_PARAPHRASES = 5
DEFAULT_TOKEN_ENV = "STRATEGIC_DELTA_API_TOKEN"
DEFAULT_PATH = "/v1/chat/completions"
EXCERPT_LENGTH = 80

RULE_MARKER = 1
RULE_LAST_NUMBER = 2
RULE_KEYWORD = 3

_MARKER = re.compile(r"DECISION\s*:\s*(?P<value>[^\n]*)", re.IGNORECASE)
_NUMBER = re.compile(r"(?<![\w.])-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?(?P<percent>\s*%)?")


class TransportMode(str, Enum):
    LIVE = "Live"
    RECORD = "Record"
    REPLAY = "Replay"


@lru_cache(maxsize=1)
def invitation_lint() -> tuple:
    """Banned behavioural-invitation phrases, lower case."""
    text = files("strategic_delta").joinpath("data/invitation_lint.txt").read_text(encoding="utf8")
    return tuple(
        line.strip().lower() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


def lint_template(text, phrases=None) -> list:
    """
    Return the banned phrases occurring in ``text``.

    Matching is a case-insensitive substring search, so "unfair" counts as
    "fair".
    """
    phrases = invitation_lint() if phrases is None else phrases
    lowered = text.lower()
    return [p for p in phrases if p in lowered]


@dataclass(frozen=True)
class PromptTemplate:
    family: Family
    role: int
    paraphrase_id: int
    text: str
    invitation_lint: tuple = ()

    @property
    def variant(self) -> str:
        return "Baseline" if self.paraphrase_id == 0 else f"Paraphrase({self.paraphrase_id})"

    @property
    def slots(self) -> set:
        return {name for _, name, _, _ in string.Formatter().parse(self.text) if name}


@dataclass
class PromptBank:
    templates: dict
    opponent: dict
    names: list
    history: dict
    instruction: dict
    stakes: str
    framing: dict

    def template(self, family, role, paraphrase_id=0) -> PromptTemplate:
        variants = self.templates.get((Family.parse(family), role))
        if not variants:
            raise InvalidParams(f"No prompt templates for {Family.parse(family).value} role {role}")
        if not 0 <= paraphrase_id < len(variants):
            raise InvalidParams(
                f"Paraphrase {paraphrase_id} not in the bank; "
                f"{Family.parse(family).value} role {role} has {len(variants)}"
            )
        return variants[paraphrase_id]

    def paraphrase_count(self, family, role) -> int:
        return len(self.templates.get((Family.parse(family), role), ()))

    def opponent_name(self, key) -> str:
        """Deterministic name for ``key`` (a session or subject id)."""
        return self.names[int(stable_hash(key)[:8], 16) % len(self.names)]


def _check_lint(where, text, phrases):
    hits = lint_template(text, phrases)
    if hits:
        LOG.error("Prompt text %s contains banned phrases %s", where, hits)
        raise InvalidParams(f"Prompt text {where} contains banned phrases: {', '.join(hits)}")


def _build_bank(data, phrases) -> PromptBank:
    templates = {}
    for family_name, roles in data["families"].items():
        family = Family.parse(family_name)
        for role, texts in roles.items():
            if len(texts) < MIN_PARAPHRASES:
                raise TooFewParaphrases(len(texts), MIN_PARAPHRASES)
            variants = []
            for i, text in enumerate(texts):
                _check_lint(f"{family.value}/{role}/{i}", text, phrases)
                variants.append(PromptTemplate(family, int(role), i, text.strip(), tuple(phrases)))
            templates[(family, int(role))] = variants
    fixed = [
        *data["opponent"].values(),
        *data["history"].values(),
        *data["instruction"].values(),
        data["stakes"],
        *data["framing"].values(),
    ]
    for i, text in enumerate(fixed):
        _check_lint(f"fixed text #{i}", text, phrases)
    return PromptBank(
        templates=templates,
        opponent={Individuation(k): v for k, v in data["opponent"].items()},
        names=list(data["names"]),
        history=dict(data["history"]),
        instruction=dict(data["instruction"]),
        stakes=data["stakes"],
        framing=dict(data["framing"]),
    )


@lru_cache(maxsize=1)
def _packaged_bank():
    text = files("strategic_delta").joinpath("data/prompts.yaml").read_text(encoding="utf8")
    return _build_bank(yaml.safe_load(text), invitation_lint())


def load_prompt_bank(path=None, phrases=None) -> PromptBank:
    """
    Load a prompt bank and lint every template in it.

    :param path: A YAML bank; the packaged bank when omitted.
    :param phrases: Lint list; the packaged list when omitted.
    :raise InvalidParams: If any template contains a banned phrase.
    :raise TooFewParaphrases: If a family/role has fewer than five variants.
    """
    if path is None and phrases is None:
        return _packaged_bank()
    if path is None:
        data = yaml.safe_load(files("strategic_delta").joinpath("data/prompts.yaml").read_text(encoding="utf8"))
    else:
        data = load_config(path)
    return _build_bank(data, tuple(phrases) if phrases is not None else invitation_lint())


def _num(value) -> str:
    return f"{float(value):g}"


def _matrix_text(game) -> str:
    row, col = game.payoff_matrices()
    row_labels, col_labels = game.params["row_labels"], game.params["col_labels"]
    lines = ["| | " + " | ".join(col_labels) + " |", "|---" * (len(col_labels) + 1) + "|"]
    for i, label in enumerate(row_labels):
        cells = [f"({_num(row[i, j])}, {_num(col[i, j])})" for j in range(len(col_labels))]
        lines.append(f"| {label} | " + " | ".join(cells) + " |")
    return "\n".join(lines)


def _game_slots(game) -> dict:
    p = game.params
    slots = {"group_size": str(game.n_players), "group_size_minus_one": str(game.n_players - 1)}
    family = game.family
    if family in (Family.DICTATOR, Family.ULTIMATUM, Family.TRUST):
        slots["pot"] = _num(p["P"])
        if family is Family.ULTIMATUM:
            slots["unit"] = _num(p["u"])
        if family is Family.TRUST:
            slots["multiplier"] = _num(p["k"])
    elif family is Family.PRISONERS_DILEMMA:
        slots.update(
            temptation=_num(p["T"]), reward=_num(p["R"]), punishment=_num(p["P_pd"]), sucker=_num(p["S"])
        )
    elif family is Family.PUBLIC_GOODS:
        slots.update(endowment=_num(p["E"]), mpcr=_num(p["m"]))
    elif family is Family.PBEAUTY:
        slots.update(upper=_num(p["H"]), p=_num(p["p"]))
    elif family is Family.FIRST_PRICE_AUCTION:
        slots.update(value=_num(p["V"]), v_lo=_num(p["v_lo"]), v_hi=_num(p["v_hi"]))
    elif family is Family.SECOND_PRICE_AUCTION:
        slots.update(value=_num(p["V"]), bid_cap=_num(p["bid_cap"]))
    elif family is Family.ALL_PAY_AUCTION:
        slots.update(prize=_num(p["V"]), bid_cap=_num(p["bid_cap"]))
    elif family is Family.TULLOCK_CONTEST:
        slots.update(prize=_num(p["V"]), exponent=_num(p["r"]))
    elif family is Family.GENERATED_BIMATRIX:
        slots.update(game_name=game.name or game.id, matrix=_matrix_text(game))
    return slots


def _fill(text, slots):
    for _, name, _, _ in string.Formatter().parse(text):
        if name and name not in slots:
            raise MissingSlot(name)
    return text.format_map(slots)


def _format_decision(value) -> str:
    if value is None:
        return "no valid answer"
    if isinstance(value, str):
        return value
    return _num(value)


def _history_text(bank, history, context_length):
    entries = list(history)
    if context_length:
        entries = entries[-context_length:]
    if not entries:
        return bank.history["first"]
    lines = [bank.history["header"]]
    for round_, own, other in entries:
        lines.append(
            bank.history["line"].format(
                round=round_, own=_format_decision(own), other=_format_decision(other)
            )
        )
    return "\n".join(lines)


def _instruction(bank, game, role):
    space = game.action_space(role)
    if isinstance(space, DiscreteSet):
        return bank.instruction["discrete"].format(labels=", ".join(space.labels))
    return bank.instruction["continuous"].format(low=_num(space.lo), high=_num(space.hi))


def render_prompt(template, game, condition, history=(), opponent_name=None, bank=None) -> str:
    """
    Fill ``template`` for ``game`` under ``condition``.

    The text is the template body, then framing and stakes lines when the
    condition calls for them, then the play history, then the decision
    format instruction. A positive ``condition.context_length`` keeps only
    the most recent rounds of history.

    :param template: A :class:`PromptTemplate` for the game's family.
    :param history: ``(round, own_decision, other_decision)`` tuples.
    :param opponent_name: Required under Named individuation.
    :param bank: Bank holding the shared wording; the packaged one by default.
    :raise WrongFamily: If the template is for another family.
    :raise MissingSlot: If a slot has no value, including a missing
        opponent name under Named individuation.

    Example:
        >>> bank = load_prompt_bank()
        >>> game = make_game("Ultimatum", {"P": 100})
        >>> text = render_prompt(bank.template("Ultimatum", 0), game, Condition("Aggregate"))
        >>> "100" in text
        True
    """
    bank = bank or load_prompt_bank()
    if template.family is not game.family:
        raise WrongFamily(template.family.value, game.family.value)
    if game.action_space(template.role) is None:
        raise InvalidParams(f"Role {template.role} of {game.id} takes no action")

    if condition.individuation is Individuation.NAMED:
        if not opponent_name:
            raise MissingSlot("opponent_name")
        opponent = _fill(bank.opponent[Individuation.NAMED], {"opponent_name": opponent_name})
    else:
        opponent = bank.opponent[Individuation.AGGREGATE]

    slots = {"opponent": opponent, **_game_slots(game)}
    parts = [
        _fill(template.text, slots),
        bank.framing.get(condition.framing.value, ""),
        _fill(bank.stakes, {"stake_scale": _num(condition.stake_scale)}) if condition.stake_scale != 1 else "",
        _history_text(bank, history, condition.context_length),
        _instruction(bank, game, template.role),
    ]
    return "\n\n".join(part for part in parts if part)


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str
    mode: TransportMode = TransportMode.REPLAY
    path: str = DEFAULT_PATH
    token_env: str = DEFAULT_TOKEN_ENV
    temperature: float = 0.0
    transcript_path: str = None
    timeout: float = 60.0
    max_retries: int = 5
    backoff_seconds: float = 2.0
    concurrency: int = 1
    budget_parameter: str = "reasoning_effort"
    budget_values: dict = None
    system_prompt: str = None

    def __post_init__(self):
        object.__setattr__(self, "mode", TransportMode(self.mode))
        if self.concurrency < 1 or self.max_retries < 1:
            raise InvalidParams("concurrency and max_retries must be >= 1")

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + "/" + self.path.lstrip("/")

    def budget_setting(self, compute_budget):
        """Endpoint value for an opaque budget level, or None for the default."""
        if not compute_budget:
            return None
        if self.budget_values:
            key = _num(compute_budget)
            if key not in self.budget_values:
                raise InvalidParams(f"No endpoint setting for compute budget {key}")
            return self.budget_values[key]
        return compute_budget


def load_endpoint_config(path, **overrides) -> EndpointConfig:
    """Read an endpoint config file; keyword overrides (e.g. ``mode``) win."""
    data = load_config(path)
    data.update({k: v for k, v in overrides.items() if v is not None})
    if "budget_values" in data and data["budget_values"] is not None:
        data["budget_values"] = {_num(k): v for k, v in data["budget_values"].items()}
    return EndpointConfig(**data)


def prompt_hash(model, prompt, temperature, compute_budget=0.0, seed=None) -> str:
    return stable_hash(
        {
            "model": model,
            "prompt": prompt,
            "temperature": float(temperature),
            "compute_budget": float(compute_budget),
            "seed": seed,
        }
    )


@dataclass
class Transcript:
    prompt_hash: str
    model: str
    prompt: str
    temperature: float
    compute_budget: float
    response: str
    seed: int = None
    game_id: str = None
    role: int = None
    decision: object = None
    rule: int = None
    requested_at: str = None
    responded_at: str = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


class TranscriptStore:
    """
    Append-only JSON-lines file of transcripts, looked up by prompt hash.

    The first transcript stored under a hash is the one replayed.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._index = {}
        if self.path.exists():
            with open(self.path, encoding="utf8") as fp:
                for number, line in enumerate(fp, start=1):
                    if not line.strip():
                        continue
                    try:
                        transcript = Transcript.from_dict(json.loads(line))
                    except (ValueError, TypeError) as e:
                        raise InvalidParams(f"{self.path}:{number}: malformed transcript") from e
                    self._index.setdefault(transcript.prompt_hash, transcript)
            LOG.debug("Loaded %d transcripts from %s", len(self._index), self.path)

    def __len__(self):
        return len(self._index)

    def __contains__(self, digest):
        return digest in self._index

    def lookup(self, digest):
        return self._index.get(digest)

    def append(self, transcript):
        line = json.dumps(transcript.to_dict(), sort_keys=True) + "\n"
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf8") as fp:
                fp.write(line)
            self._index.setdefault(transcript.prompt_hash, transcript)


def _first_text(data):
    """The first text field of a chat-completion style response."""
    if isinstance(data, dict):
        choices = data.get("choices")
        if isinstance(choices, list) and choices:
            first = choices[0]
            message = first.get("message") or {}
            if isinstance(message.get("content"), str):
                return message["content"]
            if isinstance(first.get("text"), str):
                return first["text"]
        for key in ("content", "text", "output_text"):
            if isinstance(data.get(key), str):
                return data[key]
        values = data.values()
    elif isinstance(data, list):
        values = data
    else:
        return None
    for value in values:
        found = _first_text(value)
        if found is not None:
            return found
    return None


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _post(endpoint, prompt, compute_budget, seed):
    token = os.environ.get(endpoint.token_env)
    if not token:
        LOG.error("Environment variable %s is not set", endpoint.token_env)
        raise AuthMissing(endpoint.token_env)
    messages = [{"role": "user", "content": prompt}]
    if endpoint.system_prompt:
        messages.insert(0, {"role": "system", "content": endpoint.system_prompt})
    body = {"model": endpoint.model, "messages": messages, "temperature": endpoint.temperature}
    setting = endpoint.budget_setting(compute_budget)
    if setting is not None:
        body[endpoint.budget_parameter] = setting
    if seed is not None:
        body["seed"] = seed

    def send():
        response = requests.post(
            endpoint.url,
            json=body,
            headers={"Authorization": f"Bearer {token}"},
            timeout=endpoint.timeout,
        )
        response.raise_for_status()
        return response.json()

    try:
        data = call_with_retries(
            send,
            retry_on=(requests.RequestException, ValueError),
            max_retries=endpoint.max_retries,
            backoff_seconds=endpoint.backoff_seconds,
        )
    except (requests.RequestException, ValueError) as e:
        raise NetworkError(f"{endpoint.url}: {e}") from e
    text = _first_text(data)
    if text is None:
        raise NetworkError(f"{endpoint.url}: response carries no text field")
    return text


def exchange(endpoint, prompt, compute_budget=0.0, store=None, seed=None, game=None, role=None) -> Transcript:
    """
    One prompt/response exchange under the endpoint's transport mode.

    When ``game`` and ``role`` are given the response is parsed and the
    decision (or None) is kept on the transcript.

    :raise AuthMissing: In Live/Record mode without a token.
    :raise NetworkError: When the endpoint stays unreachable.
    :raise ReplayMiss: In Replay mode when no transcript matches.
    """
    digest = prompt_hash(endpoint.model, prompt, endpoint.temperature, compute_budget, seed)
    if endpoint.mode is not TransportMode.LIVE and store is None:
        raise InvalidParams(f"{endpoint.mode.value} mode needs a transcript store")

    if endpoint.mode is TransportMode.REPLAY:
        stored = store.lookup(digest)
        if stored is None:
            LOG.error("Replay miss for prompt hash %s", digest)
            raise ReplayMiss(digest)
        transcript = Transcript.from_dict(stored.to_dict())
    else:
        requested = _now()
        text = _post(endpoint, prompt, compute_budget, seed)
        transcript = Transcript(
            prompt_hash=digest,
            model=endpoint.model,
            prompt=prompt,
            temperature=endpoint.temperature,
            compute_budget=float(compute_budget),
            response=text,
            seed=seed,
            game_id=game.id if game is not None else None,
            role=role,
            requested_at=requested,
            responded_at=_now(),
        )

    if game is not None and role is not None:
        try:
            transcript.decision, transcript.rule = parse_decision(game, role, transcript.response)
        except (Unparseable, OutOfRange):
            transcript.decision, transcript.rule = None, None
    if endpoint.mode is TransportMode.RECORD:
        store.append(transcript)
    return transcript


def query_agent(endpoint, prompt, compute_budget=0.0, store=None, seed=None) -> str:
    """Send ``prompt`` and return the raw response text; see :func:`exchange`."""
    return exchange(endpoint, prompt, compute_budget, store, seed).response


def _excerpt(text):
    text = " ".join(text.split())
    return text if len(text) <= EXCERPT_LENGTH else text[: EXCERPT_LENGTH - 3] + "..."


def _constants(game):
    return {float(v) for v in game.params.values() if isinstance(v, (int, float)) and not isinstance(v, bool)}


def _numbers(text, space):
    out = []
    for match in _NUMBER.finditer(text):
        value = float(match.group(0).rstrip("% \t"))
        if match.group("percent") and space.hi == 1:
            value /= 100
        out.append(value)
    return out


def _label(space, raw):
    raw = raw.strip().strip("*`'\".,;:!()[]").strip()
    if space.contains(raw):
        return space.labels[space.index(raw)]
    return None


def parse_decision(game, role, response_text):
    """
    Extract a decision from a free-text response.

    Rules, in order:

    1. an explicit ``DECISION: <value>`` marker (the last one wins);
    2. continuous games: the last in-range number, ignoring numbers equal
       to a game constant (such as the pot) unless nothing else is left;
    3. discrete games: the last action label mentioned.

    :return: ``(decision, rule)``
    :raise Unparseable: If no rule yields a decision.
    :raise OutOfRange: If the decision found lies outside the action space.

    Example:
        >>> parse_decision(make_game("Ultimatum", {"P": 100}), 0, "I will offer 40 of the 100.")
        (40.0, 2)
    """
    if not response_text or not response_text.strip():
        raise Unparseable("")
    space = game.action_space(role)
    if space is None:
        raise InvalidParams(f"Role {role} of {game.id} takes no action")
    discrete = isinstance(space, DiscreteSet)

    markers = list(_MARKER.finditer(response_text))
    if markers:
        value = markers[-1].group("value")
        if discrete:
            label = _label(space, value)
            if label is None:
                raise OutOfRange(value.strip(), space)
            return label, RULE_MARKER
        numbers = _numbers(value, space)
        if numbers:
            if not space.contains(numbers[0]):
                raise OutOfRange(numbers[0], space)
            return numbers[0], RULE_MARKER

    if discrete:
        pattern = re.compile(
            r"\b(" + "|".join(re.escape(label) for label in space.labels) + r")\b", re.IGNORECASE
        )
        found = pattern.findall(response_text)
        if found:
            return space.labels[space.index(found[-1])], RULE_KEYWORD
        raise Unparseable(_excerpt(response_text))

    numbers = _numbers(response_text, space)
    if not numbers:
        raise Unparseable(_excerpt(response_text))
    in_range = [v for v in numbers if space.contains(v)]
    if not in_range:
        raise OutOfRange(numbers[-1], space)
    constants = _constants(game)
    candidates = [v for v in in_range if v not in constants] or in_range
    return candidates[-1], RULE_LAST_NUMBER


def render_decision(game, role, decision) -> str:
    """Canonical ``DECISION: <value>`` line; :func:`parse_decision` reads it back unchanged."""
    space = game.action_space(role)
    if isinstance(space, DiscreteSet):
        return f"DECISION: {space.labels[space.index(decision)]}"
    value = float(decision)
    if not space.contains(value) or not math.isfinite(value):
        raise OutOfRange(decision, space)
    return f"DECISION: {value!r}"


@dataclass
class _SessionOutcome:
    records: list = field(default_factory=list)
    excluded: dict = field(default_factory=dict)


def _other_decision(game, role, decisions):
    others = [v for r, v in decisions.items() if r != role and v is not None]
    if not others:
        return None
    if len(others) == 1:
        return others[0]
    if all(isinstance(v, str) for v in others):
        return others[-1]
    return float(sum(others) / len(others))


def _play_session(endpoint, store, bank, design, cell, model_label):
    g, game, c, condition, s = cell
    session_id = f"{game.id}-c{c}-llm-{s}"
    roles = game.acting_roles
    subject_ids = {r: f"{model_label}-{s:03d}-r{r}" for r in roles}
    histories = {r: [] for r in roles}
    outcome = _SessionOutcome()
    for t in range(1, game.rounds + 1):
        decisions = {}
        for r in roles:
            template = bank.template(game.family, r, condition.paraphrase_id)
            name = bank.opponent_name(f"{session_id}-r{r}") if condition.named else None
            prompt = render_prompt(template, game, condition, histories[r], name, bank)
            transcript = exchange(
                endpoint,
                prompt,
                condition.compute_budget,
                store,
                seed=derive_seed(design.seed, g, c, s, t, r),
                game=game,
                role=r,
            )
            decisions[r] = transcript.decision
            if transcript.decision is None:
                outcome.excluded["unparseable"] = outcome.excluded.get("unparseable", 0) + 1
                LOG.warning(
                    "Unparseable response in %s round %d role %d: %s",
                    session_id, t, r, _excerpt(transcript.response),
                )
        for r in roles:
            other = _other_decision(game, r, decisions)
            histories[r].append((t, decisions[r], other))
            if decisions[r] is None:
                continue
            outcome.records.append(
                RoundRecord(
                    session_id=session_id,
                    subject_id=subject_ids[r],
                    game_id=game.id,
                    role=r,
                    round=t,
                    condition=condition,
                    decision=decisions[r],
                    opponent_decision=other,
                    arm=Arm.LLM,
                )
            )
    return outcome


def run_llm_design(design, endpoint, store=None, bank=None) -> Dataset:
    """
    Play an experiment design against a model endpoint.

    Every game x condition cell gets ``design.sessions_per_cell`` sessions;
    the design's agent arms are ignored. The prompt paraphrase comes from
    ``condition.paraphrase_id`` and the endpoint budget setting from
    ``condition.compute_budget``. Unparseable answers are left out of the
    dataset and counted in ``Dataset.excluded``; they are never re-asked.

    :param design: An :class:`agents.ExperimentDesign`.
    :param endpoint: An :class:`EndpointConfig`.
    :param store: A :class:`TranscriptStore`; opened from
        ``endpoint.transcript_path`` when omitted.
    :raise EmptyDesign: If games, conditions or sessions are empty.
    """
    if not design.games or not design.conditions or design.sessions_per_cell < 1:
        raise EmptyDesign("Experiment design has an empty factor")
    bank = bank or load_prompt_bank()
    if store is None and endpoint.transcript_path:
        store = TranscriptStore(endpoint.transcript_path)
    games = [replace(g, rounds=int(design.rounds)) for g in design.games] if design.rounds else list(design.games)
    cells = [
        (g, game, c, condition, s)
        for g, game in enumerate(games)
        for c, condition in enumerate(design.conditions)
        for s in range(design.sessions_per_cell)
    ]
    model_label = re.sub(r"[^A-Za-z0-9.]+", "-", endpoint.model).strip("-") or "llm"
    LOG.info(
        "Running %d sessions against %s in %s mode", len(cells), endpoint.model, endpoint.mode.value
    )

    def one(cell):
        return _play_session(endpoint, store, bank, design, cell, model_label)

    if endpoint.concurrency > 1:
        with ThreadPoolExecutor(max_workers=endpoint.concurrency) as pool:
            outcomes = list(pool.map(one, cells))
    else:
        outcomes = [one(cell) for cell in cells]

    records = [r for o in outcomes for r in o.records]
    excluded = {}
    for o in outcomes:
        for key, count in o.excluded.items():
            excluded[key] = excluded.get(key, 0) + count
    if excluded:
        LOG.warning("Excluded responses: %s", excluded)
    return Dataset(
        records=records,
        games={g.id: g for g in games},
        generator=f"strategic-delta llm-run {endpoint.model}",
        seed=design.seed,
        excluded=excluded,
    )
