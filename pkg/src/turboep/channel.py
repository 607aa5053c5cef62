"""Intersymbol-interference channel model: taps, convolution matrix, AWGN.

A length-L channel smears each symbol across L consecutive received samples,
so a frame of N symbols produces N + L - 1 observations.  Noise is circular
complex Gaussian with total per-sample variance ``noise_variance``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class ChannelRealization:
    """One fixed tap vector plus (optionally) a noise level.

    ``noise_variance`` is the total variance of the circular complex noise,
    i.e. E|w|^2; it stays ``None`` until the experiment driver fixes an
    operating point.
    """

    taps: np.ndarray
    noise_variance: float | None = None

    def __post_init__(self) -> None:
        self.taps = np.asarray(self.taps, dtype=complex)
        if self.taps.ndim != 1 or self.taps.size < 1:
            raise ValueError("taps must be a nonempty 1-D vector")
        if not np.any(self.taps):
            raise ValueError("taps must not be all zero")
        if self.noise_variance is not None and self.noise_variance <= 0:
            raise ValueError("noise_variance must be positive")

    @property
    def memory(self) -> int:
        return len(self.taps)


def transmit(
    symbols: np.ndarray, ch: ChannelRealization, rng: np.random.Generator
) -> np.ndarray:
    """Convolve symbols with the taps and add circular complex AWGN.

    Returns the length ``N + L - 1`` observation vector.
    """
    symbols = np.asarray(symbols, dtype=complex)
    if symbols.size < 1:
        raise ValueError("need at least one symbol")
    if ch.noise_variance is None:
        raise ValueError("channel has no noise level set")
    clean = np.convolve(symbols, ch.taps)
    scale = np.sqrt(ch.noise_variance / 2.0)
    noise = scale * (
        rng.standard_normal(clean.size) + 1j * rng.standard_normal(clean.size)
    )
    return clean + noise


def column(ch: ChannelRealization, k: int, frame_length: int) -> np.ndarray:
    """k-th column (1-indexed) of the banded convolution matrix.

    The column is zero except for the L taps starting at row k.
    """
    if not 1 <= k <= frame_length:
        raise IndexError(f"column index {k} outside 1..{frame_length}")
    length = frame_length + ch.memory - 1
    col = np.zeros(length, dtype=complex)
    col[k - 1 : k - 1 + ch.memory] = ch.taps
    return col


def convolution_matrix(ch: ChannelRealization, frame_length: int) -> np.ndarray:
    """Dense (N + L - 1) x N banded Toeplitz matrix view of the taps."""
    length = frame_length + ch.memory - 1
    mat = np.zeros((length, frame_length), dtype=complex)
    idx = np.arange(frame_length)
    for m, tap in enumerate(ch.taps):
        mat[idx + m, idx] = tap
    return mat


def random_channel(n_taps: int, rng: np.random.Generator) -> ChannelRealization:
    """Draw i.i.d. circular complex Gaussian taps, normalized to unit power.

    Per-realization normalization ``sum |h|^2 = 1`` keeps the energy-per-bit
    bookkeeping identical across channel draws.
    """
    if n_taps < 1:
        raise ValueError("n_taps must be >= 1")
    taps = rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps)
    taps /= np.linalg.norm(taps)
    return ChannelRealization(taps=taps)


def ebn0_to_noise_variance(
    ebn0_db: float,
    mean_symbol_energy: float,
    bits_per_symbol: int,
    code_rate: float,
    taps: np.ndarray,
) -> float:
    """Map an Eb/N0 operating point (dB) to the total complex noise variance.

    Counts energy per *information* bit: each symbol carries Q coded bits and
    the code spends 1/R coded bits per information bit, so
    ``sigma_w^2 = E_s * ||h||^2 / (Q * R * 10^(EbN0/10))``.
    """
    gain = float(np.sum(np.abs(np.asarray(taps)) ** 2))
    ebn0 = 10.0 ** (ebn0_db / 10.0)
    return mean_symbol_energy * gain / (bits_per_symbol * code_rate * ebn0)


def save_taps(ch: ChannelRealization, path: str | Path) -> None:
    """Write taps as one ``re im`` pair per line."""
    lines = [f"{float(t.real)!r} {float(t.imag)!r}" for t in ch.taps]
    Path(path).write_text("\n".join(lines) + "\n")


def load_taps(path: str | Path) -> ChannelRealization:
    """Read taps written by :func:`save_taps`."""
    taps = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        re_part, im_part = line.split()
        taps.append(complex(float(re_part), float(im_part)))
    return ChannelRealization(taps=np.array(taps))
