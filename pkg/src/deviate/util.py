"""Small shared helpers: RNG plumbing and JSON encoding."""

from __future__ import annotations

import json

import numpy as np


def as_generator(seed=None) -> np.random.Generator:
    """Return a numpy Generator from a seed, SeedSequence, Generator, or None."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def cell_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for one work cell, derived from a base seed and integer key.

    The stream depends only on (seed, key), never on scheduling order, so
    parallel studies produce identical results for any worker count.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def dump_json(obj, path=None, indent=2) -> str:
    """Serialize to JSON with stable key order and full float precision."""
    text = json.dumps(obj, default=_json_default, indent=indent, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text
