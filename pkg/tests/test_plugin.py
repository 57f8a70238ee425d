import pytest
import requests

from strategic_delta import DEFAULT_SEED
from strategic_delta.agents import AgentKind, run_experiment
from strategic_delta.plugin import DEFAULT_TEST_PERMUTATIONS, packaged_design


def test_options_reach_fixtures(pytester):
    pytester.makepyfile(
        """
        def test_options(delta_seed, delta_permutations, delta_replicates):
            assert (delta_seed, delta_permutations, delta_replicates) == (5, 9, 2)
        """
    )
    result = pytester.runpytest("--delta-seed=5", "--delta-permutations=9", "--delta-replicates=2")
    result.assert_outcomes(passed=1)


def test_option_defaults(pytester):
    pytester.makepyfile(
        f"""
        def test_defaults(delta_seed, delta_permutations, games):
            assert delta_seed == {DEFAULT_SEED}
            assert delta_permutations == {DEFAULT_TEST_PERMUTATIONS}
            assert "ultimatum" in games
        """
    )
    result = pytester.runpytest()
    result.assert_outcomes(passed=1)


def test_help_lists_options(pytester):
    result = pytester.runpytest("--help")
    result.stdout.fnmatch_lines(["*--delta-seed*", "*--delta-permutations*"])


@pytest.mark.parametrize(
    "name, kind",
    [("classical", AgentKind.CLASSICAL), ("bounded_human", AgentKind.BOUNDED_HUMAN), ("retrieval", AgentKind.RETRIEVAL)],
)
def test_packaged_designs(name, kind):
    design = packaged_design(name)
    agents = [a for arm in design.arms.values() for a in arm]
    assert agents and all(a.kind is kind for a in agents)
    assert design.games and design.conditions


def test_packaged_design_overrides():
    design = packaged_design("classical", seed=9, sessions_per_cell=2)
    assert (design.seed, design.sessions_per_cell) == (9, 2)
    with pytest.raises(FileNotFoundError):
        packaged_design("missing")


def test_datasets_are_reproducible(classical_dataset, delta_seed):
    again = run_experiment(packaged_design("classical", delta_seed))
    assert again.records == classical_dataset.records


def test_fake_endpoint_records_calls(chat_endpoint):
    chat_endpoint.fail_times = 1
    with pytest.raises(requests.ConnectionError):
        chat_endpoint.post("http://chat.test/x", json={"messages": [{"content": "hi"}]})
    response = chat_endpoint.post("http://chat.test/x", json={"messages": [{"content": "hi"}]})
    assert response.json()["choices"][0]["message"]["content"] == "DECISION: 0"
    assert len(chat_endpoint.calls) == 2
