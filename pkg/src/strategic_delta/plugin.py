"""
Pytest plugin with seeded synthetic datasets and an offline chat endpoint.

Study repositories get known-ground-truth data to test their pipelines
against: Classical agents (no structure), BoundedHuman agents (the
human-shaped signatures) and Retrieval agents (paraphrase sensitivity).
"""

import json
from dataclasses import dataclass, field, replace
from importlib.resources import files
from unittest import mock

import pytest
import requests

from . import DEFAULT_SEED, LOG
from .agents import design_from_dict, run_experiment
from .game_model import canonical_games
from .llm_adapter import EndpointConfig, TranscriptStore, TransportMode

DEFAULT_TEST_PERMUTATIONS = 499
DEFAULT_REPLICATES = 200
TEST_TOKEN = "test-token"


def pytest_addoption(parser):
    parser.addoption(
        "--delta-seed",
        action="store",
        default=DEFAULT_SEED,
        help=f"Master seed for synthetic datasets. By default, {DEFAULT_SEED}.",
    )
    parser.addoption(
        "--delta-permutations",
        action="store",
        default=DEFAULT_TEST_PERMUTATIONS,
        help=f"Permutations/bootstrap replicates inside tests. By default, {DEFAULT_TEST_PERMUTATIONS}.",
    )
    parser.addoption(
        "--delta-replicates",
        action="store",
        default=DEFAULT_REPLICATES,
        help=f"Monte Carlo replicates for slow acceptance checks. By default, {DEFAULT_REPLICATES}.",
    )


@pytest.fixture(scope="session")
def delta_seed(request):
    return int(request.config.getoption("--delta-seed"))


@pytest.fixture(scope="session")
def delta_permutations(request):
    return int(request.config.getoption("--delta-permutations"))


@pytest.fixture(scope="session")
def delta_replicates(request):
    return int(request.config.getoption("--delta-replicates"))


@pytest.fixture(scope="session")
def games():
    """The canonical game catalogue keyed by id."""
    return canonical_games()


def packaged_design(name, seed=None, **changes):
    """
    Load one of the bundled experiment designs.

    :param name: ``classical``, ``bounded_human`` or ``retrieval``.
    :param seed: Overrides the design seed.
    :param changes: Other :class:`ExperimentDesign` fields to override.
    """
    text = files("strategic_delta").joinpath(f"data/design_{name}.json").read_text(encoding="utf8")
    design = design_from_dict(json.loads(text))
    if seed is not None:
        changes["seed"] = seed
    return replace(design, **changes) if changes else design


def _dataset(name, seed):
    LOG.info("Simulating the %s dataset with seed %d", name, seed)
    return run_experiment(packaged_design(name, seed))


@pytest.fixture(scope="session")
def classical_dataset(delta_seed):
    """Classical agents with Gaussian noise around the equilibrium."""
    return _dataset("classical", delta_seed)


@pytest.fixture(scope="session")
def bounded_human_dataset(delta_seed):
    """BoundedHuman agents: fairness, imitation, loss aversion, individuation."""
    return _dataset("bounded_human", delta_seed)


@pytest.fixture(scope="session")
def retrieval_dataset(delta_seed):
    """Retrieval agents whose offset depends only on the prompt paraphrase."""
    return _dataset("retrieval", delta_seed)


@pytest.fixture()
def transcript_store(tmp_path):
    return TranscriptStore(tmp_path / "transcripts.jsonl")


@dataclass
class FakeChatEndpoint:
    """
    Stand-in for a chat-completion server.

    ``respond(prompt) -> str`` produces the reply text; every request body
    is kept in ``calls``.
    """

    respond: object = None
    calls: list = field(default_factory=list)
    fail_times: int = 0

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "json": json, "headers": headers})
        if self.fail_times > 0:
            self.fail_times -= 1
            raise requests.ConnectionError("connection refused")
        prompt = json["messages"][-1]["content"]
        text = self.respond(prompt) if self.respond else "DECISION: 0"
        response = mock.Mock()
        response.status_code = 200
        response.raise_for_status.return_value = None
        response.json.return_value = {
            "id": f"chatcmpl-{len(self.calls)}",
            "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": text}}],
        }
        return response

    def config(self, mode=TransportMode.LIVE, transcript_path=None, **changes):
        return EndpointConfig(
            base_url="http://chat.test",
            model="test-model",
            mode=mode,
            transcript_path=str(transcript_path) if transcript_path else None,
            backoff_seconds=0,
            **changes,
        )


@pytest.fixture()
def chat_endpoint(monkeypatch):
    """
    Patch HTTP posts from the adapter to a :class:`FakeChatEndpoint`
    and provide the API token.
    """
    endpoint = FakeChatEndpoint()
    monkeypatch.setenv("STRATEGIC_DELTA_API_TOKEN", TEST_TOKEN)
    monkeypatch.setattr("strategic_delta.llm_adapter.requests.post", endpoint.post)
    return endpoint
