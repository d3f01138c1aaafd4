"""Rayleigh channel and AWGN sampling on counter-based random streams.

Every draw is taken from a generator seeded by ``(master_seed, trial, purpose)``
through :class:`numpy.random.SeedSequence`, so a trial's randomness does not
depend on which worker runs it or in which order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

PURPOSES = {"channel": 0, "bits": 1, "noise": 2, "instance": 3}


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    trial: int = 0
    purpose: str = "channel"

    def generator(self) -> np.random.Generator:
        try:
            tag = PURPOSES[self.purpose]
        except KeyError:
            raise ConfigurationError(f"unknown stream purpose {self.purpose!r}") from None
        seq = np.random.SeedSequence(entropy=int(self.master_seed) % 2**64,
                                     spawn_key=(int(self.trial), tag))
        return np.random.default_rng(seq)


@dataclass(frozen=True, eq=False)
class ChannelSet:
    per_user: tuple[np.ndarray, ...]
    stacked: np.ndarray

    @classmethod
    def from_users(cls, mats) -> "ChannelSet":
        mats = tuple(np.asarray(m, dtype=complex) for m in mats)
        return cls(mats, np.vstack(mats))

    @property
    def K(self) -> int:
        return len(self.per_user)

    @property
    def N_R(self) -> int:
        return self.per_user[0].shape[0]

    @property
    def N_T(self) -> int:
        return self.stacked.shape[1]


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_channel(K: int, N_R: int, N_T: int, rng) -> ChannelSet:
    """i.i.d. CN(0, 1) channel for ``K`` users with ``N_R`` antennas each."""
    if min(K, N_R, N_T) <= 0:
        raise ConfigurationError("channel dimensions must be positive")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    H = complex_normal(gen, (K * N_R, N_T))
    return ChannelSet.from_users(H[k * N_R:(k + 1) * N_R] for k in range(K))


def awgn(y, sigma2: float, rng) -> np.ndarray:
    if sigma2 < 0:
        raise ConfigurationError("noise variance must be nonnegative")
    y = np.asarray(y, dtype=complex)
    if sigma2 == 0:
        return y.copy()
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return y + complex_normal(gen, y.shape, sigma2)
