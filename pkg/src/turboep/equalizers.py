"""Gaussian-marginal equalizer backends and the inner refinement loop.

Given per-symbol Gaussian site factors, the posterior over the frame is a
joint Gaussian; each backend computes its per-symbol marginal moments and the
matching extrinsics (posterior divided by the site factor):

* ``block``: one banded Hermitian solve over all N + L - 1 observations,
* ``kalman``: forward Kalman filter plus Rauch-style backward smoother on a
  shift-register state space (equal to ``block`` up to rounding),
* ``windowed``: per-symbol truncated-window solves (an approximation that
  trades accuracy for locality; not equal to ``block``).

:func:`equalize` wraps a backend with S damped moment-matching sweeps of the
site factors and returns the marginals computed from the final sites.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import solveh_banded

from .channel import ChannelRealization, convolution_matrix
from .constellation import Constellation
from .ep_core import (
    EpDiagnostics,
    EpParams,
    Gaussian,
    gaussian_divide,
    moment_match_damp,
)

BACKENDS = ("block", "kalman", "windowed")


@dataclass
class MarginalSet:
    """Per-symbol posterior and extrinsic Gaussians for one frame."""

    posteriors: Gaussian
    extrinsics: Gaussian


@dataclass
class WindowSpec:
    """Observation window for the windowed backend.

    ``window_length`` observations are used per symbol; the symbol's first
    tap sits ``center_offset`` rows into the window.
    """

    window_length: int
    center_offset: int

    def __post_init__(self) -> None:
        if self.window_length < 1:
            raise ValueError("window_length must be >= 1")
        if not 0 <= self.center_offset < self.window_length:
            raise ValueError("center_offset must lie in [0, window_length)")

    @classmethod
    def default_for(cls, n_taps: int) -> "WindowSpec":
        """Window of 3L observations with the symbol's taps centered."""
        return cls(window_length=3 * n_taps, center_offset=n_taps)


@lru_cache(maxsize=8)
def _cached_convolution_matrix(tap_bytes: bytes, n_taps: int, n: int) -> np.ndarray:
    taps = np.frombuffer(tap_bytes, dtype=complex)
    return convolution_matrix(ChannelRealization(taps=taps.copy()), n)


def _observation_band(
    ch: ChannelRealization, site_var: np.ndarray
) -> np.ndarray:
    """Lower-form band of sigma_w^2 I + H diag(site_var) H^H.

    Row d holds the d-th subdiagonal: band[d, i] = A[i+d, i].
    """
    h = ch.taps
    n_taps = ch.memory
    n_obs = site_var.size + n_taps - 1
    band = np.zeros((n_taps, n_obs), dtype=complex)
    for d in range(n_taps):
        w_d = h[: n_taps - d] * np.conj(h[d:])
        band[d, : n_obs - d] = np.conj(np.convolve(site_var, w_d))
    band[0] += ch.noise_variance
    return band


def block_marginals(
    y: np.ndarray, ch: ChannelRealization, factors: Gaussian
) -> MarginalSet:
    """Exact Gaussian marginals via one banded Hermitian solve.

    Parameters
    ----------
    y : np.ndarray
        Observations, length N + L - 1.
    ch : ChannelRealization
        Taps and noise level.
    factors : Gaussian
        Site factors, shape (N,), strictly positive variances.

    Returns
    -------
    MarginalSet
        Posterior means ``mu_t + s2_t * h_k^H A^{-1} (y - H mu_t)`` and
        variances ``s2_t - s2_t^2 * h_k^H A^{-1} h_k`` with
        ``A = sigma_w^2 I + H diag(s2_t) H^H``, plus the extrinsic ratios.
    """
    n = factors.mean.size
    h = ch.taps
    if y.size != n + ch.memory - 1:
        raise ValueError("observation length inconsistent with frame length")
    band = _observation_band(ch, factors.variance)
    dense_h = _cached_convolution_matrix(h.tobytes(), ch.memory, n)
    residual = y - np.convolve(factors.mean, h)
    rhs = np.empty((y.size, n + 1), dtype=complex)
    rhs[:, 0] = residual
    rhs[:, 1:] = dense_h
    try:
        solved = solveh_banded(band, rhs, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"banded factorization failed: {exc}") from exc
    corr = dense_h.conj().T @ solved[:, 0]
    quad = np.einsum("ij,ij->j", dense_h.conj(), solved[:, 1:]).real
    post_mean = factors.mean + factors.variance * corr
    post_var = factors.variance - factors.variance**2 * quad
    posteriors = Gaussian(post_mean, post_var)
    return MarginalSet(posteriors, gaussian_divide(posteriors, factors))


def kalman_smoother_marginals(
    y: np.ndarray, ch: ChannelRealization, factors: Gaussian
) -> MarginalSet:
    """Same marginals as :func:`block_marginals` via filtering and smoothing.

    The state at step k stacks the L most recent symbols; the transition
    shifts the register and injects the next symbol with its site-factor
    prior (a deterministic zero once the frame is exhausted, so every
    observation is consumed).  A forward Kalman pass and a backward
    Rauch-style pass yield each symbol's posterior from the smoothed state
    in O(N L^2) arithmetic.
    """
    h = ch.taps
    n_taps = ch.memory
    n = factors.mean.size
    n_obs = n + n_taps - 1
    if y.size != n_obs:
        raise ValueError("observation length inconsistent with frame length")
    sw = ch.noise_variance
    h_row = h.astype(complex)
    h_conj = np.conj(h_row)

    inj_mean = np.zeros(n_obs, dtype=complex)
    inj_var = np.zeros(n_obs)
    inj_mean[:n] = factors.mean
    inj_var[:n] = factors.variance

    m_pred = np.empty((n_obs, n_taps), dtype=complex)
    p_pred = np.empty((n_obs, n_taps, n_taps), dtype=complex)
    m_filt = np.empty_like(m_pred)
    p_filt = np.empty_like(p_pred)

    mean = np.zeros(n_taps, dtype=complex)
    cov = np.zeros((n_taps, n_taps), dtype=complex)
    mean[0] = inj_mean[0]
    cov[0, 0] = inj_var[0]
    for k in range(n_obs):
        if k > 0:
            shifted_mean = np.empty(n_taps, dtype=complex)
            shifted_mean[0] = inj_mean[k]
            shifted_mean[1:] = mean[:-1]
            shifted_cov = np.zeros((n_taps, n_taps), dtype=complex)
            shifted_cov[1:, 1:] = cov[:-1, :-1]
            shifted_cov[0, 0] = inj_var[k]
            mean, cov = shifted_mean, shifted_cov
        m_pred[k] = mean
        p_pred[k] = cov
        innov_var = (h_row @ cov @ h_conj).real + sw
        gain = (cov @ h_conj) / innov_var
        mean = mean + gain * (y[k] - h_row @ mean)
        cov = cov - np.outer(gain, h_row @ cov)
        cov = 0.5 * (cov + cov.conj().T)
        m_filt[k] = mean
        p_filt[k] = cov

    post_mean = np.empty(n, dtype=complex)
    post_var = np.empty(n)
    m_s = m_filt[n_obs - 1]
    p_s = p_filt[n_obs - 1]
    if n_obs - 1 < n:
        post_mean[n_obs - 1] = m_s[0]
        post_var[n_obs - 1] = p_s[0, 0].real
    for k in range(n_obs - 2, -1, -1):
        # gain = P_f F^H pinv(P_pred,k+1); F shifts, so P_f F^H is P_f with
        # its columns moved one slot right and a zero first column.
        pf_ft = np.zeros((n_taps, n_taps), dtype=complex)
        pf_ft[:, 1:] = p_filt[k][:, : n_taps - 1]
        gain = pf_ft @ np.linalg.pinv(p_pred[k + 1], hermitian=True)
        m_s = m_filt[k] + gain @ (m_s - m_pred[k + 1])
        p_s = p_filt[k] + gain @ (p_s - p_pred[k + 1]) @ gain.conj().T
        p_s = 0.5 * (p_s + p_s.conj().T)
        if k < n:
            post_mean[k] = m_s[0]
            post_var[k] = p_s[0, 0].real
    posteriors = Gaussian(post_mean, post_var)
    return MarginalSet(posteriors, gaussian_divide(posteriors, factors))


def windowed_marginals(
    y: np.ndarray,
    ch: ChannelRealization,
    factors: Gaussian,
    window: WindowSpec,
) -> MarginalSet:
    """Approximate marginals from a truncated observation window per symbol.

    Symbol k is estimated from the ``window_length`` observations starting at
    row ``k - center_offset`` (clipped to the frame, so edge symbols use
    shorter effective windows).  All N window systems are solved in one
    batched call; out-of-range window rows are padded with unit-diagonal
    rows that contribute nothing, which is arithmetically identical to
    truncation.
    """
    h = ch.taps
    n_taps = ch.memory
    n = factors.mean.size
    n_obs = n + n_taps - 1
    if y.size != n_obs:
        raise ValueError("observation length inconsistent with frame length")
    w_len = window.window_length
    offset = window.center_offset

    band = _observation_band(ch, factors.variance)
    residual = y - np.convolve(factors.mean, h)

    starts = np.arange(n) - offset
    rows = starts[:, None] + np.arange(w_len)[None, :]
    valid = (rows >= 0) & (rows < n_obs)
    safe_rows = np.clip(rows, 0, n_obs - 1)

    a_mat = np.zeros((n, w_len, w_len), dtype=complex)
    diag_idx = np.arange(w_len)
    diag_vals = np.where(valid, band[0].real[safe_rows], 1.0)
    a_mat[:, diag_idx, diag_idx] = diag_vals
    for d in range(1, n_taps):
        if d >= w_len:
            break
        sub = band[d]
        pos = np.arange(w_len - d)
        r_low = rows[:, pos]
        ok = (r_low >= 0) & (r_low + d < n_obs)
        vals = np.where(ok, sub[np.clip(r_low, 0, n_obs - 1 - d)], 0.0)
        a_mat[:, pos + d, pos] = vals
        a_mat[:, pos, pos + d] = np.conj(vals)

    rhs = np.zeros((n, w_len, 2), dtype=complex)
    rhs[:, :, 0] = np.where(valid, residual[safe_rows], 0.0)
    tap_slots = np.arange(w_len) - offset
    in_span = (tap_slots >= 0) & (tap_slots < n_taps)
    h_window = np.zeros(w_len, dtype=complex)
    h_window[in_span] = h[tap_slots[in_span]]
    rhs[:, :, 1] = h_window[None, :]

    solved = np.linalg.solve(a_mat, rhs)
    h_conj = np.conj(h_window)
    corr = np.einsum("j,ij->i", h_conj, solved[:, :, 0])
    quad = np.einsum("j,ij->i", h_conj, solved[:, :, 1]).real
    post_mean = factors.mean + factors.variance * corr
    post_var = factors.variance - factors.variance**2 * quad
    posteriors = Gaussian(post_mean, post_var)
    return MarginalSet(posteriors, gaussian_divide(posteriors, factors))


def _compute_marginals(
    backend: str,
    y: np.ndarray,
    ch: ChannelRealization,
    factors: Gaussian,
    window: WindowSpec | None,
) -> MarginalSet:
    if backend == "block":
        return block_marginals(y, ch, factors)
    if backend == "kalman":
        return kalman_smoother_marginals(y, ch, factors)
    if backend == "windowed":
        spec = window or WindowSpec.default_for(ch.memory)
        return windowed_marginals(y, ch, factors, spec)
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


def equalize(
    y: np.ndarray,
    ch: ChannelRealization,
    factors: Gaussian,
    prior_pmf: np.ndarray,
    c: Constellation,
    params: EpParams,
    backend: str = "block",
    window: WindowSpec | None = None,
    diag: EpDiagnostics | None = None,
) -> MarginalSet:
    """Run one equalization: S site-refinement sweeps plus a final pass.

    Each sweep computes marginals and extrinsics with the current sites,
    then refreshes every site by damped moment matching against the discrete
    prior.  With ``params.inner_iters == 0`` this is a single linear-MMSE
    style marginal/extrinsic computation.

    Returns the marginals computed from the final site factors.
    """
    marginals = _compute_marginals(backend, y, ch, factors, window)
    if diag is not None:
        diag.extrinsic_passes += 1
    for _ in range(params.inner_iters):
        factors = moment_match_damp(
            marginals.extrinsics, factors, prior_pmf, params, c, diag
        )
        marginals = _compute_marginals(backend, y, ch, factors, window)
        if diag is not None:
            diag.extrinsic_passes += 1
    return marginals
