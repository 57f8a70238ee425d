"""
Utility functions shared by the strategic-delta modules.

This module provides seeded random substreams, chunked resampling loops,
config loading and hashing helpers, and the retry wrapper used for
network calls.
"""

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import yaml

from . import LOG
from .exceptions import InvalidParams

__all__ = [
    "call_with_retries",
    "config_hash",
    "derive_seed",
    "load_config",
    "resample_chunks",
    "stable_hash",
    "substream",
]

MAX_RETRIES = 5
BACKOFF_SECONDS = 2
RESAMPLE_CHUNK = 500


def substream(seed, *keys) -> np.random.Generator:
    """
    Return a generator for an independent substream of ``seed``.

    The substream is fully determined by ``(seed, *keys)``, so a replicate,
    session or chunk gets the same draws whatever order it runs in.

    :param seed: Master seed.
    :type seed: int
    :param keys: Non-negative integers identifying the substream.
    :return: A numpy Generator.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(keys)))


def derive_seed(seed, *keys) -> int:
    """Derive a plain integer seed for a substream."""
    return int(np.random.SeedSequence(seed, spawn_key=tuple(keys)).generate_state(1)[0])


def resample_chunks(n_resamples, seed, func, workers=1, chunk=RESAMPLE_CHUNK):
    """
    Run a resampling loop in fixed-size chunks and concatenate the results.

    ``func(rng, size)`` must return an array with ``size`` leading entries.
    Chunk ``i`` always uses substream ``(seed, i)``, so results are identical
    for any number of ``workers``.

    :param n_resamples: Total number of resamples.
    :param seed: Master seed.
    :param func: Callable ``(rng, size) -> np.ndarray``.
    :param workers: Thread count for the chunks.
    :param chunk: Resamples per chunk.
    :return: Concatenated results, length ``n_resamples``.
    """
    sizes = [min(chunk, n_resamples - start) for start in range(0, n_resamples, chunk)]

    def run(index):
        return np.asarray(func(substream(seed, index), sizes[index]))

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    if not parts:
        return np.empty(0)
    return np.concatenate(parts)


def stable_hash(obj) -> str:
    """SHA-256 of the canonical JSON form of ``obj``."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf8")).hexdigest()


def config_hash(config) -> str:
    """Short hash used in logs to identify a run configuration."""
    return stable_hash(config)[:12]


def load_config(path) -> dict:
    """
    Load a JSON (or YAML) configuration file.

    :param path: Path to the file.
    :return: Parsed mapping.
    :raise InvalidParams: If the file does not hold a mapping.
    """
    with open(path, encoding="utf8") as fp:
        data = yaml.safe_load(fp)
    if not isinstance(data, dict):
        raise InvalidParams(f"{path} must contain a mapping, got {type(data).__name__}")
    return data


def call_with_retries(
    func,
    retry_on,
    max_retries=MAX_RETRIES,
    backoff_seconds=BACKOFF_SECONDS,
    sleep=time.sleep,
):
    """
    Call ``func()`` until it succeeds, sleeping ``attempt * backoff_seconds``
    between attempts.

    :param func: Zero-argument callable.
    :param retry_on: Exception class or tuple of classes worth retrying.
    :param max_retries: Maximum number of attempts.
    :param backoff_seconds: Base back-off.
    :param sleep: Sleep function, injectable for tests.
    :return: Whatever ``func`` returns.
    :raise: The last exception when all attempts fail.
    """
    attempt = 1
    while True:
        try:
            result = func()
            LOG.debug("Call succeeded on attempt %d", attempt)
            return result
        except retry_on as e:
            if attempt >= max_retries:
                LOG.error("Call failed after %d attempts", attempt)
                raise
            sleep_time = backoff_seconds * attempt
            LOG.warning(
                "Attempt %d failed with %s. Retrying in %ds...", attempt, e, sleep_time
            )
            sleep(sleep_time)
            attempt += 1
