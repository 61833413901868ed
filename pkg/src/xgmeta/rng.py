"""Deterministic random streams.

Every source of randomness in the package draws from a named stream derived
from a (seed, purpose) pair, so that independent components (corpus
generation, data splitting, parameter init, batch shuffling, ...) never share
or perturb each other's state, and runs replay exactly across platforms.

Derivation: the purpose string is hashed with FNV-1a (64-bit), xor-folded
into the user seed, and the result is passed through two SplitMix64 rounds.
The mixed value seeds a PCG64 generator.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _fnv1a(text):
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def _splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, (z ^ (z >> 31)) & _MASK64


def derive(seed, purpose):
    """Mix a user seed with a purpose label into a 64-bit stream seed."""
    state = (int(seed) & _MASK64) ^ _fnv1a(purpose)
    state, _ = _splitmix64(state)
    _, out = _splitmix64(state)
    return out


def stream(seed, purpose):
    """A numpy Generator for the named (seed, purpose) stream."""
    return np.random.Generator(np.random.PCG64(derive(seed, purpose)))
