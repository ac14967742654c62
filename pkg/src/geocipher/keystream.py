"""Chebyshev-map keystream and the key-dependent material derived from it.

Keystream states are documented 1-based (K^1 .. K^2N) and stored 0-based:
``Keystream.states[j - 1]`` holds K^j.  The seed K^0 is never stored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

KEY_WIDTH = 6


def chebyshev_next(k, degree: int):
    """One step of the Chebyshev map, ``cos(D * arccos(k))``.

    Works on scalars and arrays.  The result is clipped into [-1, 1] to
    absorb floating-point overshoot.

    Raises
    ------
    ValueError
        If any ``|k| > 1``.
    """
    arr = np.asarray(k, dtype=float)
    if np.any(np.abs(arr) > 1.0) or np.any(np.isnan(arr)):
        raise ValueError("Chebyshev map is defined on [-1, 1] only")
    out = _step(arr, degree)
    if out.ndim == 0:
        return float(out)
    return out


def _step(state: np.ndarray, degree: int) -> np.ndarray:
    # Closure keeps iterates in [-1, 1]; skip the domain check inside loops.
    return np.clip(np.cos(degree * np.arccos(state)), -1.0, 1.0)


def _iterate(state: np.ndarray, degree: int, count: int) -> np.ndarray:
    out = np.empty((count, KEY_WIDTH))
    for i in range(count):
        state = _step(state, degree)
        out[i] = state
    return out


@dataclass(frozen=True)
class ChaoticKey:
    """Seed vector K^0 and map degree D."""

    k0: tuple
    degree: int = 3

    def __post_init__(self):
        k0 = tuple(float(v) for v in self.k0)
        if len(k0) != KEY_WIDTH:
            raise ValueError(f"key needs {KEY_WIDTH} components, got {len(k0)}")
        if any(not -1.0 <= v <= 1.0 for v in k0):
            raise ValueError("key components must lie in [-1, 1]")
        if int(self.degree) != self.degree or self.degree < 3:
            raise ValueError("map degree D must be an integer >= 3")
        object.__setattr__(self, "k0", k0)
        object.__setattr__(self, "degree", int(self.degree))


@dataclass(frozen=True, eq=False)
class Keystream:
    """Ordered states K^1..K^n, each a 6-vector in [-1, 1].

    ``degree`` is needed only to extend the stream (permutation derivation);
    an explicitly supplied stream may leave it as ``None``.
    """

    states: np.ndarray
    degree: Optional[int] = None

    def __post_init__(self):
        states = np.array(self.states, dtype=float, ndmin=2)
        if states.ndim != 2 or states.shape[1] != KEY_WIDTH:
            raise ValueError("keystream states must have shape (n, 6)")
        if np.any(np.abs(states) > 1.0):
            raise ValueError("keystream values must lie in [-1, 1]")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "_ext", np.empty((0, KEY_WIDTH)))

    def __len__(self) -> int:
        return len(self.states)

    @property
    def flat(self) -> np.ndarray:
        """Scalar view k^1_1, ..., k^1_6, k^2_1, ..."""
        return self.states.reshape(-1)

    def extension(self, n_values: int) -> np.ndarray:
        """The next ``n_values`` scalars after the last stored state."""
        if self.degree is None:
            raise ValueError("cannot extend a keystream without a map degree")
        n_states = -(-n_values // KEY_WIDTH)
        have = len(self._ext)
        if n_states > have:
            last = self._ext[-1] if have else self.states[-1]
            more = _iterate(last, self.degree, n_states - have)
            object.__setattr__(self, "_ext", np.concatenate([self._ext, more]))
        return self._ext.reshape(-1)[:n_values].copy()


def generate(key: ChaoticKey, count: int) -> Keystream:
    """Iterate the Chebyshev map ``count`` times from ``key.k0``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return Keystream(_iterate(np.asarray(key.k0, dtype=float), key.degree, count), key.degree)


def derive_permutation(ks: Keystream, block_len: int, block_index: int) -> np.ndarray:
    """Key-derived permutation of ``range(block_len)`` (0-based).

    Block ``b`` rank-sorts the ``block_len`` extension values starting at
    offset ``b * block_len`` past the end of the stream.  Ties (e.g. a frozen
    stream at a fixed point) resolve by position, so the result is always a
    bijection.
    """
    if block_len < 1:
        raise ValueError("block_len must be >= 1")
    if block_index < 0:
        raise ValueError("block_index must be >= 0")
    if block_len == 1:
        return np.zeros(1, dtype=int)
    start = block_index * block_len
    values = ks.extension(start + block_len)[start:]
    return np.argsort(values, kind="stable")


def keystream_from_values(values: Sequence[float], degree: Optional[int] = None) -> Keystream:
    """Build a stream from explicit scalars, six per state."""
    flat = np.asarray(values, dtype=float).reshape(-1)
    if len(flat) == 0 or len(flat) % KEY_WIDTH:
        raise ValueError(f"explicit keystream length must be a positive multiple of {KEY_WIDTH}")
    return Keystream(flat.reshape(-1, KEY_WIDTH), degree)
