"""Seed derivation.

All randomness in the package flows through generators created here, keyed by
(seed, stream id, index...) so that every trainer, evaluator and session is
replayable from its config seed alone.
"""

from __future__ import annotations

import numpy as np

# Stream ids. Values are arbitrary but frozen: changing them changes every
# seeded trajectory in existence.
ENV = 1
INIT = 2
ROLLOUT = 3
EVAL = 4
BUFFER = 5
SHUFFLE = 6
COMMAND = 7
POLICY = 8


def rng_from(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def subseed(seed: int, *key: int) -> int:
    """Derived integer seed, for components that take a seed rather than a generator."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])
