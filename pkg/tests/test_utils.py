import numpy as np
import pytest

from strategic_delta.exceptions import InvalidParams
from strategic_delta.utils import (
    call_with_retries,
    config_hash,
    derive_seed,
    load_config,
    resample_chunks,
    stable_hash,
    substream,
)


def test_call_with_retries_recovers():
    attempts, sleeps = [], []

    def flaky():
        attempts.append(1)
        if len(attempts) < 3:
            raise ConnectionError("down")
        return "up"

    assert call_with_retries(flaky, ConnectionError, backoff_seconds=2, sleep=sleeps.append) == "up"
    assert sleeps == [2, 4]


def test_call_with_retries_gives_up():
    sleeps = []

    def broken():
        raise ConnectionError("down")

    with pytest.raises(ConnectionError):
        call_with_retries(broken, ConnectionError, max_retries=3, backoff_seconds=1, sleep=sleeps.append)
    assert sleeps == [1, 2]


def test_call_with_retries_ignores_other_errors():
    def wrong():
        raise KeyError("x")

    with pytest.raises(KeyError):
        call_with_retries(wrong, ConnectionError, sleep=pytest.fail)


def test_substreams():
    assert substream(1, 2, 3).random() == substream(1, 2, 3).random()
    assert substream(1, 2, 3).random() != substream(1, 3, 2).random()
    assert derive_seed(1, 4) == derive_seed(1, 4)
    assert derive_seed(1, 4) != derive_seed(2, 4)


def test_resample_chunks_worker_invariant():
    def draw(rng, size):
        return rng.normal(size=size)

    single = resample_chunks(1234, 7, draw, workers=1)
    threaded = resample_chunks(1234, 7, draw, workers=4)
    assert len(single) == 1234
    np.testing.assert_array_equal(single, threaded)
    assert len(resample_chunks(0, 7, draw)) == 0


def test_hashes():
    assert stable_hash({"a": 1, "b": 2}) == stable_hash({"b": 2, "a": 1})
    assert len(config_hash({"seed": 1})) == 12
    assert config_hash({"seed": 1}) != config_hash({"seed": 2})


def test_load_config(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("seed: 3\npermutations: 999\n")
    assert load_config(path) == {"seed": 3, "permutations": 999}
    path.write_text('{"seed": 4}')
    assert load_config(path) == {"seed": 4}
    path.write_text("- 1\n- 2\n")
    with pytest.raises(InvalidParams):
        load_config(path)
