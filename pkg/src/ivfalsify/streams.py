"""Counter-based random substreams for reproducible simulation.

Every draw is addressed by (seed, node_index, lane, row_index) and computed
by a stateless hash, so results do not depend on the order in which nodes
or row blocks are evaluated.  The generator is the splitmix64 finalizer
applied to a keyed counter; gaussians use Box-Muller on two fixed lanes.
"""
from __future__ import annotations

import numpy as np

GENERATOR_NAME = "ncrng-v1"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = (1 << 64) - 1


def _mix(x: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """splitmix64 finalizer; bijective on uint64 with full avalanche."""
    x = np.uint64(x) if not isinstance(x, np.ndarray) else x
    with np.errstate(over="ignore"):  # wrapping is the point
        x = (x ^ (x >> np.uint64(30))) * _MIX1
        x = (x ^ (x >> np.uint64(27))) * _MIX2
        return x ^ (x >> np.uint64(31))


def raw_words(seed: int, node_index: int, lane: int, start: int, count: int) -> np.ndarray:
    """uint64 words for rows [start, start+count) of one substream."""
    if count < 0 or start < 0:
        raise ValueError("start and count must be nonnegative")
    with np.errstate(over="ignore"):
        key = _mix(np.uint64(int(seed) & _U64_MASK) + _GOLDEN * np.uint64(node_index + 1))
        key = _mix(key + _GOLDEN * np.uint64(lane + 1))
        rows = np.arange(start, start + count, dtype=np.uint64)
        return _mix(key + _GOLDEN * (rows + np.uint64(1)))


def uniforms(seed: int, node_index: int, lane: int, start: int, count: int) -> np.ndarray:
    """Uniform draws on [0, 1) with 53-bit resolution."""
    return (raw_words(seed, node_index, lane, start, count) >> np.uint64(11)) * 2.0**-53


def _uniforms_open(seed: int, node_index: int, lane: int, start: int, count: int) -> np.ndarray:
    # (0, 1] so that log() below is always finite
    w = raw_words(seed, node_index, lane, start, count) >> np.uint64(11)
    return (w + np.uint64(1)) * 2.0**-53


def gaussians(seed: int, node_index: int, lane: int, start: int, count: int) -> np.ndarray:
    """Standard normal draws via Box-Muller; consumes lanes (lane, lane+1)."""
    u1 = _uniforms_open(seed, node_index, lane, start, count)
    u2 = uniforms(seed, node_index, lane + 1, start, count)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
