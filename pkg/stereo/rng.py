"""Named random sub-streams derived from a single run seed."""

import numpy as np

STREAMS = {
    "init": 0,
    "sampling": 1,
    "split": 2,
    "synth": 3,
    "gradcheck": 4,
}


def stream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """
    Independent generator for one component; the same (seed, name, keys) always replays.

    Extra integer ``keys`` split a component into further sub-streams.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, STREAMS[name], *keys]))


def stream_seed(seed: int, name: str) -> int:
    """Integer seed for APIs that take one (network initialization)."""
    return int(np.random.SeedSequence([seed, STREAMS[name]]).generate_state(1)[0])
