"""
Dataset ingestion and serialization, the bundled evidence table, and report rendering.

A dataset file is a CSV with a few ``# key: value`` metadata lines on top
(schema version, generator, master seed) and one row per decision. Games
that are not in the canonical catalogue live in a sidecar
``<name>.games.json`` next to the CSV.
"""

import io
import json
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path

import numpy as np
import pandas as pd

from . import LOG, SCHEMA_VERSION
from .exceptions import (
    FieldTypeError,
    MissingColumn,
    ParseError,
    StrategicDeltaError,
    UnknownGame,
)
from .game_model import (
    Condition,
    DiscreteSet,
    Framing,
    Individuation,
    canonical_games,
    load_games,
    save_games,
)
from .residuals import Arm, RoundRecord

__all__ = [
    "Dataset",
    "EvidenceRow",
    "REQUIRED_COLUMNS",
    "evidence_summary",
    "load_dataset",
    "load_evidence",
    "render_report",
    "write_dataset",
]

REQUIRED_COLUMNS = (
    "session_id",
    "subject_id",
    "game_id",
    "role",
    "round",
    "individuation",
    "framing",
    "paraphrase_id",
    "stake_scale",
    "compute_budget",
    "context_length",
    "decision",
    "opponent_decision",
    "arm",
)
EVIDENCE_COLUMNS = ("study", "family", "statistic", "llm_value", "human_value", "direction", "note")


@dataclass
class Dataset:
    records: list
    games: dict = field(default_factory=dict)
    generator: str = "unknown"
    seed: int = None
    schema_version: int = SCHEMA_VERSION
    errors: list = field(default_factory=list)
    excluded: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".games.json")


def _format_value(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_dataset(path, dataset):
    """Write ``dataset`` as CSV plus a sidecar game file for non-canonical games."""
    rows = [
        {
            "session_id": r.session_id,
            "subject_id": r.subject_id,
            "game_id": r.game_id,
            "role": r.role,
            "round": r.round,
            "individuation": r.condition.individuation.value,
            "framing": r.condition.framing.value,
            "paraphrase_id": r.condition.paraphrase_id,
            "stake_scale": _format_value(float(r.condition.stake_scale)),
            "compute_budget": _format_value(float(r.condition.compute_budget)),
            "context_length": r.condition.context_length,
            "decision": _format_value(r.decision),
            "opponent_decision": _format_value(r.opponent_decision),
            "arm": Arm(r.arm).value,
        }
        for r in dataset.records
    ]
    frame = pd.DataFrame(rows, columns=list(REQUIRED_COLUMNS))
    with open(path, "w", encoding="utf8", newline="") as fp:
        fp.write(f"# schema_version: {dataset.schema_version}\n")
        fp.write(f"# generator: {dataset.generator}\n")
        fp.write(f"# seed: {'' if dataset.seed is None else dataset.seed}\n")
        frame.to_csv(fp, index=False, lineterminator="\n")
    catalogue = canonical_games()
    extra = [g for gid, g in sorted(dataset.games.items()) if catalogue.get(gid) != g]
    if extra:
        save_games(sidecar_path(path), extra)
    LOG.info("Wrote %d records to %s", len(dataset.records), path)


def _read_header(fp):
    meta, skipped = {}, 0
    while True:
        position = fp.tell()
        line = fp.readline()
        if not line.startswith("#"):
            fp.seek(position)
            return meta, skipped
        skipped += 1
        key, _, value = line[1:].partition(":")
        meta[key.strip()] = value.strip()


def _parse_decision(game, role, raw, line, column):
    space = game.action_space(role)
    if space is None:
        raise FieldTypeError(line, column, raw)
    if isinstance(space, DiscreteSet):
        if not space.contains(raw):
            raise FieldTypeError(line, column, raw)
        return space.labels[space.index(raw)]
    try:
        value = float(raw)
    except ValueError as e:
        raise FieldTypeError(line, column, raw) from e
    if not space.contains(value):
        raise FieldTypeError(line, column, raw)
    return value


def _parse_row(row, line, games):
    def typed(column, cast):
        try:
            return cast(row[column])
        except (TypeError, ValueError) as e:
            raise FieldTypeError(line, column, row[column]) from e

    game_id = row["game_id"]
    if game_id not in games:
        raise UnknownGame(game_id)
    game = games[game_id]
    role = typed("role", int)
    round_ = typed("round", int)
    if round_ < 1:
        raise FieldTypeError(line, "round", row["round"])
    try:
        condition = Condition(
            individuation=typed("individuation", Individuation),
            framing=typed("framing", Framing),
            paraphrase_id=typed("paraphrase_id", int),
            stake_scale=typed("stake_scale", float),
            compute_budget=typed("compute_budget", float),
            context_length=typed("context_length", int),
        )
    except StrategicDeltaError as e:
        if isinstance(e, FieldTypeError):
            raise
        raise FieldTypeError(line, "condition", str(e)) from e
    if not 0 <= role < len(game.action_spaces):
        raise FieldTypeError(line, "role", row["role"])
    opponent = row["opponent_decision"]
    if opponent == "":
        opponent = None
    elif not isinstance(game.action_space(role), DiscreteSet):
        opponent = typed("opponent_decision", float)
    return RoundRecord(
        session_id=row["session_id"],
        subject_id=row["subject_id"],
        game_id=game_id,
        role=role,
        round=round_,
        condition=condition,
        decision=_parse_decision(game, role, row["decision"], line, "decision"),
        opponent_decision=opponent,
        arm=typed("arm", Arm),
    )


def load_dataset(path, games=None, lenient=False) -> Dataset:
    """
    Read a dataset CSV.

    Rows failing type checks are collected with their line numbers; unless
    ``lenient`` the first one is raised, otherwise they are dropped and
    counted.

    :param games: Extra games keyed by id, on top of the canonical
        catalogue and the sidecar file.
    :raise MissingColumn: If a required column is absent.
    :raise FieldTypeError: On a malformed row (non-lenient).
    :raise UnknownGame: If a row references an unknown game id.
    """
    known = canonical_games()
    sidecar = sidecar_path(path)
    if sidecar.exists():
        known.update(load_games(sidecar))
    known.update(games or {})

    with open(path, encoding="utf8", newline="") as fp:
        meta, skipped = _read_header(fp)
        frame = pd.read_csv(fp, dtype=str, keep_default_na=False)
    for column in REQUIRED_COLUMNS:
        if column not in frame.columns:
            LOG.error("%s lacks column %s", path, column)
            raise MissingColumn(column)

    records, errors = [], []
    for i, row in enumerate(frame.to_dict("records")):
        line = skipped + 2 + i
        try:
            records.append(_parse_row(row, line, known))
        except FieldTypeError as e:
            errors.append(e)

    if errors and not lenient:
        LOG.error("%s: %d rows failed type checks", path, len(errors))
        raise errors[0]
    if errors:
        LOG.warning("%s: dropped %d malformed rows", path, len(errors))

    version = int(meta.get("schema_version") or SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ParseError(f"{path}: schema version {version}, expected {SCHEMA_VERSION}")
    seed = meta.get("seed")
    used = {r.game_id for r in records}
    return Dataset(
        records=records,
        games={gid: g for gid, g in known.items() if gid in used},
        generator=meta.get("generator", "unknown"),
        seed=int(seed) if seed else None,
        schema_version=version,
        errors=errors,
    )


@dataclass(frozen=True)
class EvidenceRow:
    study: str
    family: str
    statistic: str
    llm_value: float
    human_value: float
    direction: str
    note: str

    @property
    def divergence(self):
        if self.llm_value is None or self.human_value is None:
            return None
        return round(self.llm_value - self.human_value, 12)


def _optional_float(value, line, column):
    if value in ("", None):
        return None
    try:
        number = float(value)
    except ValueError as e:
        raise ParseError(f"Line {line}: {column} is not a number: {value!r}") from e
    if number < 0:
        raise ParseError(f"Line {line}: {column} must be nonnegative, got {number}")
    return number


def load_evidence(path=None) -> list:
    """
    Read an evidence table, by default the bundled one.

    :raise ParseError: On missing columns, negative values or rates outside [0, 1].
    """
    if path is None:
        text = files("strategic_delta").joinpath("data/evidence.csv").read_text(encoding="utf8")
    else:
        text = Path(path).read_text(encoding="utf8")
    try:
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseError(str(e)) from e
    missing = [c for c in EVIDENCE_COLUMNS if c not in frame.columns]
    if missing:
        raise ParseError(f"Evidence table lacks columns {missing}")
    rows = []
    for i, row in enumerate(frame.to_dict("records")):
        line = i + 2
        llm = _optional_float(row["llm_value"], line, "llm_value")
        human = _optional_float(row["human_value"], line, "human_value")
        if "rate" in row["statistic"]:
            for value in (llm, human):
                if value is not None and value > 1:
                    raise ParseError(f"Line {line}: rate {value} is outside [0, 1]")
        rows.append(
            EvidenceRow(
                study=row["study"],
                family=row["family"],
                statistic=row["statistic"],
                llm_value=llm,
                human_value=human,
                direction=row["direction"],
                note=row["note"],
            )
        )
    return rows


def evidence_summary(path=None) -> dict:
    """Tabulate LLM-vs-human contrasts with the sign of each divergence."""
    rows = []
    for r in load_evidence(path):
        diff = r.divergence
        rows.append(
            {
                "study": r.study,
                "family": r.family,
                "statistic": r.statistic,
                "llm": r.llm_value,
                "human": r.human_value,
                "diff": diff,
                "sign": None if diff is None else int(np.sign(diff)),
                "direction": r.direction,
            }
        )
    quantified = [row for row in rows if row["diff"] is not None]
    return {
        "schema_version": SCHEMA_VERSION,
        "rows": rows,
        "quantified": len(quantified),
        "direction_only": len(rows) - len(quantified),
    }


def _markdown_table(frame):
    header = "| " + " | ".join(frame.columns) + " |"
    rule = "|" + "---|" * len(frame.columns)
    body = [
        "| " + " | ".join("" if pd.isna(v) else (f"{v:.4g}" if isinstance(v, float) else str(v)) for v in row) + " |"
        for row in frame.itertuples(index=False)
    ]
    return "\n".join([header, rule] + body)


def render_report(result):
    """
    Render a CLI JSON result as Markdown plus tidy tables for plotting.

    :param result: Parsed JSON document written by the CLI.
    :return: ``(markdown, {name: DataFrame})``
    """
    command = result.get("command", "unknown")
    body = result.get("result", {})
    tables = {}
    lines = [f"# {command} report", "", f"seed: {result.get('seed')}, config: {result.get('config_hash')}", ""]
    if command == "analyze":
        tests = pd.DataFrame(body.get("tests", []) + body.get("llm_tests", []))
        keep = [c for c in ("test", "statistic", "p_value", "effect", "power", "flagged", "outcome") if c in tests]
        tables["tests"] = tests[keep] if len(tests) else tests
        lines += [f"Classification: **{body.get('classification')}**", "", _markdown_table(tables["tests"])]
    elif command == "moderator":
        games = pd.DataFrame(body.get("games", []))
        if len(games):
            games["ci_lo"] = [c[0] for c in games["ci95"]]
            games["ci_hi"] = [c[1] for c in games["ci95"]]
            games = games[["game_id", "d", "hedges_g", "ci_lo", "ci_hi", "n_named", "n_aggregate", "verdict"]]
        tables["effects"] = games
        lines += [
            f"Verdict: **{body.get('verdict')}** (pooled d = {body.get('pooled_d', float('nan')):.3f})",
            "",
            _markdown_table(games),
        ]
    elif command == "evidence":
        tables["evidence"] = pd.DataFrame(body.get("rows", []))
        lines.append(_markdown_table(tables["evidence"]))
    elif command == "solve":
        tables["baselines"] = pd.DataFrame(
            [{k: v for k, v in b.items() if k not in ("support", "weights")} for b in body.get("baselines", [])]
        )
        lines.append(_markdown_table(tables["baselines"]))
    else:
        lines += ["```json", json.dumps(body, indent=2, sort_keys=True), "```"]
    return "\n".join(lines) + "\n", tables
