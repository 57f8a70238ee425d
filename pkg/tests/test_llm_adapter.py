import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from strategic_delta.dataset import write_dataset
from strategic_delta.exceptions import (
    AuthMissing,
    InvalidParams,
    MissingSlot,
    NetworkError,
    OutOfRange,
    ReplayMiss,
    TooFewParaphrases,
    Unparseable,
    WrongFamily,
)
from strategic_delta.game_model import (
    Condition,
    Family,
    Framing,
    Individuation,
    canonical_games,
    generate_novel_game,
)
from strategic_delta.llm_adapter import (
    MIN_PARAPHRASES,
    PromptTemplate,
    RULE_KEYWORD,
    RULE_LAST_NUMBER,
    RULE_MARKER,
    Transcript,
    TranscriptStore,
    TransportMode,
    exchange,
    lint_template,
    load_endpoint_config,
    load_prompt_bank,
    parse_decision,
    prompt_hash,
    query_agent,
    render_decision,
    render_prompt,
    run_llm_design,
)
from strategic_delta.plugin import packaged_design
from strategic_delta.residuals import Arm

AGGREGATE = Condition(Individuation.AGGREGATE)


@pytest.fixture(scope="module")
def bank():
    return load_prompt_bank()


@pytest.mark.parametrize(
    "game_id, role, text, expected",
    [
        ("ultimatum", 0, "I will offer 40 of the 100.", (40.0, RULE_LAST_NUMBER)),
        ("pd", 0, "DECISION: cooperate", ("cooperate", RULE_MARKER)),
        ("pd", 1, "Tough call, but I defect this time.", ("defect", RULE_KEYWORD)),
        ("ultimatum", 0, "Maybe 30? No.\nDECISION: 45\nDecision: 50", (50.0, RULE_MARKER)),
        ("trust", 1, "I send back 40% of what arrives.", (0.4, RULE_LAST_NUMBER)),
        ("ultimatum", 1, "Anything at or above 100 points... fine, 100.", (100.0, RULE_LAST_NUMBER)),
        ("pd", 0, "DECISION: **Defect**", ("defect", RULE_MARKER)),
    ],
)
def test_parse_decision(games, game_id, role, text, expected):
    assert parse_decision(games[game_id], role, text) == expected


@pytest.mark.parametrize("text", ["That depends.", "", "   "])
def test_parse_decision_unparseable(ultimatum, text):
    with pytest.raises(Unparseable):
        parse_decision(ultimatum, 0, text)


def test_parse_decision_out_of_range(ultimatum, pd_game):
    with pytest.raises(OutOfRange):
        parse_decision(ultimatum, 0, "DECISION: 150")
    with pytest.raises(OutOfRange):
        parse_decision(ultimatum, 0, "I would offer 250.")
    with pytest.raises(OutOfRange):
        parse_decision(pd_game, 0, "DECISION: betray")
    with pytest.raises(Unparseable):
        parse_decision(pd_game, 0, "I am not sure what to do.")


@given(st.floats(min_value=0, max_value=100, allow_nan=False))
def test_rendered_decisions_parse_back(value):
    game = canonical_games()["ultimatum"]
    assert parse_decision(game, 0, render_decision(game, 0, value)) == (value, RULE_MARKER)


def test_bundled_bank_is_complete_and_clean(bank, games):
    for game in games.values():
        for role in game.acting_roles:
            assert bank.paraphrase_count(game.family, role) >= MIN_PARAPHRASES
    for variants in bank.templates.values():
        for template in variants:
            assert lint_template(template.text) == []
    assert bank.template("Ultimatum", 0, 3).variant == "Paraphrase(3)"
    assert bank.template("Ultimatum", 0).variant == "Baseline"


def test_lint_template():
    assert lint_template("Please be FAIR to the other side.") == ["fair"]
    assert lint_template("Split 100 points.") == []


def test_bank_rejects_banned_phrases():
    with pytest.raises(InvalidParams):
        load_prompt_bank(phrases=["points"])


def test_bank_needs_five_paraphrases(tmp_path):
    path = tmp_path / "bank.yaml"
    path.write_text(
        "families:\n  Dictator:\n    0:\n" + "".join(f"      - Give away part of {{pot}} ({i}).\n" for i in range(4))
    )
    with pytest.raises(TooFewParaphrases):
        load_prompt_bank(path)


def test_bank_template_lookup_errors(bank):
    with pytest.raises(InvalidParams):
        bank.template("Dictator", 1)
    with pytest.raises(InvalidParams):
        bank.template("Dictator", 0, 99)


def test_render_prompt_aggregate(bank, ultimatum):
    text = render_prompt(bank.template("Ultimatum", 0), ultimatum, AGGREGATE, bank=bank)
    assert "100" in text
    assert "drawn at random" in text
    assert "This is the first round." in text
    assert text.endswith("DECISION: <number>.")
    assert "{" not in text


def test_render_prompt_named_needs_a_name(bank, ultimatum):
    named = Condition(Individuation.NAMED)
    with pytest.raises(MissingSlot):
        render_prompt(bank.template("Ultimatum", 0), ultimatum, named, bank=bank)
    text = render_prompt(bank.template("Ultimatum", 0), ultimatum, named, opponent_name="Jordan Lee", bank=bank)
    assert "Jordan Lee" in text


def test_render_prompt_conditions(bank, pd_game):
    condition = Condition(Individuation.AGGREGATE, Framing.LOSS, stake_scale=2.0, context_length=1)
    history = [(1, "cooperate", "defect"), (2, "defect", "defect")]
    text = render_prompt(bank.template("pd", 0, 2), pd_game, condition, history, bank=bank)
    assert bank.framing["Loss"] in text
    assert "2x" in text
    assert "Round 2: you chose defect" in text
    assert "Round 1:" not in text
    assert "one of: cooperate, defect" in text


def test_render_prompt_wrong_family(bank, ultimatum, games):
    with pytest.raises(WrongFamily):
        render_prompt(bank.template("Trust", 0), ultimatum, AGGREGATE, bank=bank)
    recipient = PromptTemplate(Family.DICTATOR, 1, 0, "You receive what {opponent} sends.")
    with pytest.raises(InvalidParams):
        render_prompt(recipient, games["dictator"], AGGREGATE, bank=bank)


def test_render_generated_game(bank):
    game = generate_novel_game(8, (2, 3))
    text = render_prompt(bank.template(game.family, 1), game, AGGREGATE, bank=bank)
    row, col = game.payoff_matrices()
    assert game.name in text
    assert f"({row[0, 0]:g}, {col[0, 0]:g})" in text
    for label in game.action_space(1).labels:
        assert label in text


def test_live_exchange(chat_endpoint):
    chat_endpoint.respond = lambda prompt: "DECISION: 12"
    endpoint = chat_endpoint.config(system_prompt="Answer briefly.")
    assert query_agent(endpoint, "hello", seed=7) == "DECISION: 12"
    (call,) = chat_endpoint.calls
    assert call["url"] == "http://chat.test/v1/chat/completions"
    assert call["headers"]["Authorization"] == "Bearer test-token"
    assert call["json"]["model"] == "test-model"
    assert call["json"]["seed"] == 7
    assert call["json"]["messages"][0] == {"role": "system", "content": "Answer briefly."}
    assert "reasoning_effort" not in call["json"]


def test_exchange_parses_decision(chat_endpoint, ultimatum):
    chat_endpoint.respond = lambda prompt: "I offer 35."
    transcript = exchange(chat_endpoint.config(), "prompt", game=ultimatum, role=0)
    assert (transcript.decision, transcript.rule) == (35.0, RULE_LAST_NUMBER)
    chat_endpoint.respond = lambda prompt: "No idea."
    transcript = exchange(chat_endpoint.config(), "prompt", game=ultimatum, role=0)
    assert transcript.decision is None


def test_budget_setting(chat_endpoint):
    endpoint = chat_endpoint.config(budget_values={"1": "low", "2": "high"})
    query_agent(endpoint, "think", compute_budget=2)
    assert chat_endpoint.calls[-1]["json"]["reasoning_effort"] == "high"
    with pytest.raises(InvalidParams):
        query_agent(endpoint, "think", compute_budget=3)


def test_retries_then_succeeds(chat_endpoint):
    chat_endpoint.fail_times = 2
    assert query_agent(chat_endpoint.config(), "hello") == "DECISION: 0"
    assert len(chat_endpoint.calls) == 3


def test_retries_exhausted(chat_endpoint):
    chat_endpoint.fail_times = 10
    with pytest.raises(NetworkError):
        query_agent(chat_endpoint.config(max_retries=3), "hello")
    assert len(chat_endpoint.calls) == 3


def test_auth_missing(chat_endpoint, monkeypatch):
    monkeypatch.delenv("STRATEGIC_DELTA_API_TOKEN")
    with pytest.raises(AuthMissing):
        query_agent(chat_endpoint.config(), "hello")
    assert chat_endpoint.calls == []


def test_record_then_replay(chat_endpoint, transcript_store):
    chat_endpoint.respond = lambda prompt: f"DECISION: {len(prompt)}"
    recorder = chat_endpoint.config(mode=TransportMode.RECORD)
    recorded = query_agent(recorder, "abc", store=transcript_store, seed=1)
    assert len(transcript_store) == 1

    reopened = TranscriptStore(transcript_store.path)
    replayer = chat_endpoint.config(mode=TransportMode.REPLAY)
    assert query_agent(replayer, "abc", store=reopened, seed=1) == recorded
    assert len(chat_endpoint.calls) == 1

    with pytest.raises(ReplayMiss):
        query_agent(replayer, "abc", store=reopened, seed=2)
    with pytest.raises(InvalidParams):
        query_agent(replayer, "abc")


def test_store_keeps_first_transcript(transcript_store):
    digest = prompt_hash("m", "p", 0.0)
    transcript_store.append(Transcript(digest, "m", "p", 0.0, 0.0, "first"))
    transcript_store.append(Transcript(digest, "m", "p", 0.0, 0.0, "second"))
    assert transcript_store.lookup(digest).response == "first"
    assert TranscriptStore(transcript_store.path).lookup(digest).response == "first"
    assert len(transcript_store.path.read_text().splitlines()) == 2


def test_store_rejects_malformed_lines(tmp_path):
    path = tmp_path / "broken.jsonl"
    path.write_text('{"prompt_hash": "x"\n')
    with pytest.raises(InvalidParams):
        TranscriptStore(path)


def test_prompt_hash_covers_inputs():
    base = prompt_hash("m", "p", 0.0)
    assert base == prompt_hash("m", "p", 0)
    assert base != prompt_hash("m", "p", 0.5)
    assert base != prompt_hash("m", "p", 0.0, compute_budget=1)
    assert base != prompt_hash("m", "p", 0.0, seed=3)


def test_load_endpoint_config(tmp_path):
    path = tmp_path / "endpoint.json"
    path.write_text(json.dumps({"base_url": "http://x/", "model": "m", "budget_values": {"1.0": "low"}}))
    endpoint = load_endpoint_config(path, mode="Record", transcript_path=None)
    assert endpoint.mode is TransportMode.RECORD
    assert endpoint.url == "http://x/v1/chat/completions"
    assert endpoint.budget_setting(1) == "low"
    assert endpoint.budget_setting(0) is None


def _small_design(**changes):
    return packaged_design("classical", rounds=2, sessions_per_cell=1, **changes)


def test_run_llm_design_live(chat_endpoint, bank):
    chat_endpoint.respond = lambda prompt: "Let me think.\nDECISION: 30"
    dataset = run_llm_design(_small_design(), chat_endpoint.config(), bank=bank)
    assert len(dataset) == 16
    assert len(chat_endpoint.calls) == 16
    assert {r.arm for r in dataset.records} == {Arm.LLM}
    assert {r.decision for r in dataset.records} == {30.0}
    assert "test-model-000-r0" in {r.subject_id for r in dataset.records}
    assert dataset.generator == "strategic-delta llm-run test-model"
    named = [c["json"]["messages"][-1]["content"] for c in chat_endpoint.calls]
    assert any(any(name in prompt for name in bank.names) for prompt in named)
    second_round = [p for p in named if "Round 1: you chose 30" in p]
    assert len(second_round) == 8


def test_run_llm_design_replays_identically(chat_endpoint, tmp_path):
    chat_endpoint.respond = lambda prompt: f"DECISION: {len(prompt) % 90}"
    transcripts = tmp_path / "run.jsonl"
    recorded = run_llm_design(_small_design(), chat_endpoint.config(TransportMode.RECORD, transcripts))
    calls = len(chat_endpoint.calls)
    replayed = run_llm_design(_small_design(), chat_endpoint.config(TransportMode.REPLAY, transcripts))
    assert len(chat_endpoint.calls) == calls
    write_dataset(tmp_path / "recorded.csv", recorded)
    write_dataset(tmp_path / "replayed.csv", replayed)
    assert (tmp_path / "recorded.csv").read_text() == (tmp_path / "replayed.csv").read_text()


def test_run_llm_design_concurrency_keeps_order(chat_endpoint):
    chat_endpoint.respond = lambda prompt: f"DECISION: {len(prompt) % 90}"
    sequential = run_llm_design(_small_design(), chat_endpoint.config())
    parallel = run_llm_design(_small_design(), chat_endpoint.config(concurrency=4))
    assert [(r.session_id, r.decision) for r in sequential.records] == [
        (r.session_id, r.decision) for r in parallel.records
    ]


def test_run_llm_design_counts_unparseable(chat_endpoint):
    chat_endpoint.respond = lambda prompt: "I would rather not say."
    dataset = run_llm_design(_small_design(), chat_endpoint.config())
    assert len(dataset) == 0
    assert dataset.excluded == {"unparseable": 16}


def test_run_llm_design_replay_miss(chat_endpoint, tmp_path):
    with pytest.raises(ReplayMiss):
        run_llm_design(_small_design(), chat_endpoint.config(TransportMode.REPLAY, tmp_path / "empty.jsonl"))
