"""AWGN channel and soft symbol estimates (SSEs).

An SSE is p(bit=0|y) - p(bit=1|y), a real in (-1, 1); for BPSK over AWGN it
is tanh(y/sigma^2).  SSEs are clamped to +/-(1 - 1e-12) so that downstream
normalization factors stay strictly positive.

Noise is generated with numpy's Philox counter-based generator keyed by
(seed, frame_index), so any frame of a run can be produced independently,
in any order, on any thread, with identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SSE_CLAMP = 1.0 - 1e-12


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelParams:
    """SNR point for BPSK over AWGN.

    ``ebn0_db`` is the information-bit SNR; with rate R and unit-energy
    symbols the per-dimension noise variance is 1/(2*R*10^(ebn0_db/10)).
    """

    ebn0_db: float
    rate: float = 0.5
    seed: int = 0

    @property
    def sigma2(self) -> float:
        return 1.0 / (2.0 * self.rate * 10.0 ** (self.ebn0_db / 10.0))

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))


def frame_rng(seed: int, frame_index: int = 0) -> np.random.Generator:
    """Independent, reproducible per-frame generator (Philox keyed streams)."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, frame_index & 0xFFFFFFFFFFFFFFFF],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def transmit(symbols, params: ChannelParams, frame_index: int = 0) -> np.ndarray:
    """y = x + n with n i.i.d. zero-mean Gaussian of std sigma."""
    if params.sigma <= 0:
        raise ChannelError("sigma must be positive")
    symbols = np.asarray(symbols, dtype=np.float64)
    rng = frame_rng(params.seed, frame_index)
    return symbols + params.sigma * rng.standard_normal(symbols.shape)


def sse_from_channel(y, sigma: float):
    """SSE of a BPSK symbol from its channel observation.

    Equals p(0|y) - p(1|y) under equiprobable bits (channel LLR 2y/sigma^2),
    clamped away from +/-1.
    """
    if sigma <= 0:
        raise ChannelError("sigma must be positive")
    x = np.tanh(np.asarray(y, dtype=np.float64) / (sigma * sigma))
    return np.clip(x, -SSE_CLAMP, SSE_CLAMP)


def make_sse_frame(codeword, params: ChannelParams, frame_index: int = 0) -> np.ndarray:
    """Modulate, transmit, and demap a codeword into an (L, 2) SSE frame."""
    from .codes import bpsk

    codeword = np.asarray(codeword)
    if codeword.size % 2:
        raise ChannelError("codeword length must be even (c1, c2 per step)")
    y = transmit(bpsk(codeword), params, frame_index)
    return sse_from_channel(y, params.sigma).reshape(-1, 2)
