"""M-QAM alphabets with Gray labeling and soft bit/symbol conversions.

The labeling convention is fixed once and documented here so that every
numeric example in the test suite is deterministic:

* Square constellations use an independent reflected Gray code per axis.
  Axis levels are enumerated in *descending* order (+(2^m - 1), ..., -(2^m - 1))
  so that the all-zero label sits in the first quadrant.
* Points are ordered lexicographically by (I index, Q index); the label of a
  point is the concatenation of the I-axis Gray bits and the Q-axis Gray bits.
* 128-QAM uses the standard cross constellation obtained by folding the outer
  columns of a 16x8 rectangular Gray grid into the top/bottom extensions.
  The fold keeps labels intact, so the mapping is quasi-Gray: a few adjacent
  pairs across the fold boundary differ in two bits.
* All constellations are normalized to unit mean symbol energy.

Bit LLRs follow the convention ``llr = log P(b=0) - log P(b=1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

_SUPPORTED_ORDERS = (2, 4, 16, 64, 128)


def _gray_bits(index: np.ndarray, width: int) -> np.ndarray:
    """Return the reflected-Gray bit pattern of each index as a (len, width) array."""
    gray = index ^ (index >> 1)
    shifts = np.arange(width - 1, -1, -1)
    return ((gray[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def _axis_levels(n_levels: int) -> np.ndarray:
    """Descending odd levels +(n-1), +(n-3), ..., -(n-1) for one axis."""
    return (n_levels - 1) - 2 * np.arange(n_levels)


@dataclass
class Constellation:
    """A complex symbol alphabet with a fixed bit labeling.

    Attributes
    ----------
    points : np.ndarray
        Complex constellation points, shape (M,).
    labels : np.ndarray
        Bit label per point, shape (M, Q), dtype uint8. All labels distinct.
    bits_per_symbol : int
        Q = log2(M).
    mean_energy : float
        Arithmetic mean of |point|^2 (equals 1.0 for the built-in alphabets).
    """

    points: np.ndarray
    labels: np.ndarray
    bits_per_symbol: int
    mean_energy: float
    _label_index: dict = field(init=False, repr=False)
    _bit_masks: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        keys = [tuple(int(b) for b in row) for row in self.labels]
        if len(set(keys)) != len(keys):
            raise ValueError("labels must be distinct")
        self._label_index = {k: i for i, k in enumerate(keys)}
        # _bit_masks[j, m] is True when bit j of label m equals 1.
        self._bit_masks = self.labels.T.astype(bool)

    @property
    def order(self) -> int:
        """Number of points M."""
        return len(self.points)

    @classmethod
    def qam(cls, order: int) -> "Constellation":
        """Build the canonical Gray-labeled alphabet of the given order.

        Parameters
        ----------
        order : int
            Constellation size, one of {2, 4, 16, 64, 128}.

        Returns
        -------
        Constellation
            Unit-mean-energy alphabet under the labeling documented in the
            module docstring.
        """
        if order not in _SUPPORTED_ORDERS:
            raise ValueError(f"unsupported constellation order {order}")
        q = int(np.log2(order))
        if order == 2:
            points = np.array([1.0 + 0.0j, -1.0 + 0.0j])
            labels = np.array([[0], [1]], dtype=np.uint8)
            return cls(points, labels, 1, float(np.mean(np.abs(points) ** 2)))

        m_i = (q + 1) // 2
        m_q = q // 2
        n_i, n_q = 1 << m_i, 1 << m_q
        i_idx, q_idx = np.divmod(np.arange(order), n_q)
        i_lvl = _axis_levels(n_i)[i_idx].astype(float)
        q_lvl = _axis_levels(n_q)[q_idx].astype(float)
        if order == 128:
            i_lvl, q_lvl = _fold_cross(i_lvl, q_lvl)
        points = i_lvl + 1j * q_lvl
        points = points / np.sqrt(np.mean(np.abs(points) ** 2))
        labels = np.hstack([_gray_bits(i_idx, m_i), _gray_bits(q_idx, m_q)])
        return cls(points, labels, q, float(np.mean(np.abs(points) ** 2)))

    def modulate(self, bits: np.ndarray) -> np.ndarray:
        """Map a bit sequence to symbols, Q bits per symbol.

        Parameters
        ----------
        bits : np.ndarray
            Flat 0/1 array whose length is divisible by ``bits_per_symbol``.

        Returns
        -------
        np.ndarray
            Complex symbols, length ``len(bits) // bits_per_symbol``.
        """
        bits = np.asarray(bits)
        if bits.size % self.bits_per_symbol:
            raise ValueError(
                f"bit count {bits.size} not divisible by Q={self.bits_per_symbol}"
            )
        blocks = bits.reshape(-1, self.bits_per_symbol)
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        keys = blocks @ weights
        label_keys = self.labels @ weights
        lookup = np.empty(1 << self.bits_per_symbol, dtype=np.int64)
        lookup[label_keys] = np.arange(self.order)
        return self.points[lookup[keys]]

    def hard_demap(self, symbols: np.ndarray) -> np.ndarray:
        """Nearest-point bit decisions; returns a flat bit array."""
        symbols = np.asarray(symbols)
        nearest = np.argmin(
            np.abs(symbols[:, None] - self.points[None, :]), axis=1
        )
        return self.labels[nearest].reshape(-1)

    def prior_pmf_from_llrs(self, llrs: np.ndarray) -> np.ndarray:
        """Convert per-bit LLRs into symbol prior pmfs.

        Parameters
        ----------
        llrs : np.ndarray
            Shape (N, Q) finite LLRs, ``llr = log P(b=0)/P(b=1)``.

        Returns
        -------
        np.ndarray
            Shape (N, M); row m-th entry proportional to the product of the
            bit probabilities selected by point m's label, normalized to 1.
        """
        llrs = np.atleast_2d(np.asarray(llrs, dtype=float))
        if llrs.shape[1] != self.bits_per_symbol:
            raise ValueError("LLR block width must equal bits_per_symbol")
        if not np.all(np.isfinite(llrs)):
            raise ValueError("LLRs must be finite; clip upstream")
        # log P(b=0) = -log(1+e^-llr), log P(b=1) = -log(1+e^llr)
        logp0 = -np.logaddexp(0.0, -llrs)
        logp1 = -np.logaddexp(0.0, llrs)
        lab = self.labels.astype(float)
        logpmf = logp0 @ (1.0 - lab.T) + logp1 @ lab.T
        logpmf -= logsumexp(logpmf, axis=1, keepdims=True)
        return np.exp(logpmf)

    def extrinsic_llrs_from_gaussian(
        self, mean: np.ndarray, variance: np.ndarray
    ) -> np.ndarray:
        """Demap per-symbol Gaussian extrinsics into per-bit LLRs.

        Parameters
        ----------
        mean : np.ndarray
            Extrinsic means, shape (N,).
        variance : np.ndarray
            Extrinsic variances (total complex variance), shape (N,) or scalar,
            strictly positive.

        Returns
        -------
        np.ndarray
            Shape (N, Q) unclipped LLRs computed with log-sum-exp reductions.
        """
        mean = np.atleast_1d(np.asarray(mean))
        variance = np.broadcast_to(np.asarray(variance, dtype=float), mean.shape)
        if np.any(variance <= 0):
            raise ValueError("extrinsic variance must be positive")
        logw = -np.abs(mean[:, None] - self.points[None, :]) ** 2 / variance[:, None]
        llrs = np.empty((mean.size, self.bits_per_symbol))
        for j in range(self.bits_per_symbol):
            ones = self._bit_masks[j]
            llrs[:, j] = logsumexp(logw[:, ~ones], axis=1) - logsumexp(
                logw[:, ones], axis=1
            )
        return llrs

    def pmf_moments(self, pmf: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Exact mean and central variance of symbol pmfs over the alphabet.

        Parameters
        ----------
        pmf : np.ndarray
            Shape (N, M) rows summing to 1.

        Returns
        -------
        tuple of np.ndarray
            Means (complex, shape (N,)) and variances ``E|u - mean|^2``.
        """
        pmf = np.atleast_2d(np.asarray(pmf, dtype=float))
        mean = pmf @ self.points
        var = (pmf @ (np.abs(self.points) ** 2)).real - np.abs(mean) ** 2
        return mean, np.maximum(var, 0.0)


def _fold_cross(i_lvl: np.ndarray, q_lvl: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fold 16x8 rectangular levels into the 128-point cross shape."""
    outer = np.abs(i_lvl) > 11
    new_i = np.where(outer, np.sign(i_lvl) * np.abs(q_lvl), i_lvl)
    new_q = np.where(outer, np.sign(q_lvl) * (np.abs(i_lvl) - 4), q_lvl)
    return new_i, new_q
