import hashlib
import json
from typing import Any, Union

import numpy as np

from constants import TIE_TOLERANCE

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]


def make_rng(*keys: int) -> np.random.Generator:
    """Build a generator whose stream depends only on the integer keys.

    Used to derive per-cell seeds from (master seed, distribution, task, agent)
    so results do not depend on execution order or worker count.
    """
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def as_rng(seed: SeedLike) -> np.random.Generator:
    """Return `seed` unchanged if it is already a generator, else seed a new one."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    """Root seed sequence for spawning children; a generator contributes one draw of entropy."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(2**63)))
    return np.random.SeedSequence(seed)


def stable_digest(payload: Any) -> str:
    """SHA-256 of the canonical JSON encoding of `payload`."""
    encoded = json.dumps(payload, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(encoded).hexdigest()


def argmax_ties(values: np.ndarray, tolerance: float = TIE_TOLERANCE) -> np.ndarray:
    """Boolean mask of entries within `tolerance` of the maximum."""
    values = np.asarray(values, dtype=float)
    return values >= values.max() - tolerance


def random_argmax(values: np.ndarray, rng: np.random.Generator) -> int:
    """Index of the maximum, ties broken uniformly at random."""
    candidates = np.flatnonzero(argmax_ties(values))
    if candidates.size == 1:
        return int(candidates[0])
    return int(rng.choice(candidates))
