"""Core expectation-propagation machinery shared by every equalizer.

All operations act elementwise on vectors of scalar Gaussians: a
:class:`Gaussian` holds a complex mean array and a real variance array of the
same shape.  Variances follow the total-variance convention for circular
complex Gaussians, ``var = E|u - mean|^2``.

The pieces provided here are:

* Gaussian division (extrinsic = posterior / site factor),
* exact moments of the discrete tilted distribution (cavity times the
  symbol prior pmf),
* the damped moment-matching site update with its two negative-variance
  control policies,
* projection of a discrete prior onto a Gaussian, and
* the outer-loop site initialization that reuses the previous turbo
  iteration's extrinsic instead of a bare projection.

Damping blends *natural parameters* (precision and precision-times-mean),
not moments; the two choices genuinely differ and the natural-parameter form
is the one used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constellation import Constellation

#: Minimum variance floor applied to tilted/projected distributions.
DEFAULT_EPSILON = 1e-8


class DegenerateDivisionError(ArithmeticError):
    """Raised when a Gaussian ratio has equal variances (infinite result)."""


@dataclass
class Gaussian:
    """Elementwise complex Gaussian parameters.

    Attributes
    ----------
    mean : np.ndarray
        Complex means (any shape, scalars allowed).
    variance : np.ndarray
        Real variances, same shape as ``mean``.  May be negative transiently
        inside the site update; every public entry point documents whether it
        tolerates that.
    """

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=complex)
        self.variance = np.asarray(self.variance, dtype=float)
        if self.mean.shape != self.variance.shape:
            raise ValueError("mean and variance shapes differ")

    def copy(self) -> "Gaussian":
        return Gaussian(self.mean.copy(), self.variance.copy())


@dataclass
class EpParams:
    """Tuning knobs for the site update.

    Attributes
    ----------
    epsilon : float
        Variance floor for tilted/projected distributions.
    beta : float
        Damping weight in [0, 1]; 1 means no damping, 0 freezes the sites.
    inner_iters : int
        Number of site-refinement sweeps S inside one equalization call.
    variance_control : str
        ``"keep"`` keeps the previous site when the damped precision is not
        positive; ``"abs"`` takes the absolute value of the damped variance
        and keeps the damped mean.
    """

    epsilon: float = DEFAULT_EPSILON
    beta: float = 1.0
    inner_iters: int = 0
    variance_control: str = "keep"

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.inner_iters < 0:
            raise ValueError("inner_iters must be >= 0")
        if self.variance_control not in ("keep", "abs"):
            raise ValueError("variance_control must be 'keep' or 'abs'")


@dataclass
class EpDiagnostics:
    """Mutable counters threaded through a frame for instrumentation."""

    extrinsic_passes: int = 0
    control_triggers: int = 0
    degenerate_divisions: int = 0
    notes: list = field(default_factory=list)


def gaussian_divide(num: Gaussian, den: Gaussian) -> Gaussian:
    """Divide two Gaussians, returning the (possibly negative-variance) ratio.

    Parameters
    ----------
    num, den : Gaussian
        Elementwise numerator and denominator with broadcastable shapes.

    Returns
    -------
    Gaussian
        ``variance = v_n v_d / (v_d - v_n)`` and
        ``mean = (m_n v_d - m_d v_n) / (v_d - v_n)``.  Negative variances are
        returned as-is; the caller decides policy.

    Raises
    ------
    DegenerateDivisionError
        If any elementwise pair has exactly equal variances.
    """
    v_n = np.asarray(num.variance, dtype=float)
    v_d = np.asarray(den.variance, dtype=float)
    gap = v_d - v_n
    if np.any(gap == 0.0):
        bad = np.nonzero(np.atleast_1d(gap) == 0.0)[0]
        raise DegenerateDivisionError(
            f"equal variances at positions {bad[:8].tolist()}"
        )
    variance = v_n * v_d / gap
    mean = (num.mean * v_d - den.mean * v_n) / gap
    return Gaussian(mean, variance)


def tilted_moments(
    cavity: Gaussian, prior_pmf: np.ndarray, c: Constellation
) -> Gaussian:
    """Exact moments of the discrete posterior ``prior * N(point; cavity)``.

    Parameters
    ----------
    cavity : Gaussian
        Extrinsic (cavity) parameters, shape (N,), variances > 0.
    prior_pmf : np.ndarray
        Per-symbol prior pmfs, shape (N, M).
    c : Constellation
        Alphabet supplying the M points.

    Returns
    -------
    Gaussian
        Mean and central variance of each length-M weighted point set.  Rows
        whose weights all underflow fall back to the prior's own moments,
        which signals an extreme cavity/prior mismatch without poisoning the
        frame with NaNs.
    """
    mean = np.atleast_1d(cavity.mean)
    variance = np.broadcast_to(np.atleast_1d(cavity.variance), mean.shape)
    if np.any(variance <= 0):
        raise ValueError("cavity variances must be positive")
    prior_pmf = np.atleast_2d(prior_pmf)
    with np.errstate(divide="ignore"):
        logw = np.log(prior_pmf) - (
            np.abs(mean[:, None] - c.points[None, :]) ** 2 / variance[:, None]
        )
    logw -= np.max(logw, axis=1, keepdims=True)
    w = np.exp(logw)
    norm = w.sum(axis=1)
    ok = norm > 0
    safe_norm = np.where(ok, norm, 1.0)
    post_mean = (w @ c.points) / safe_norm
    post_e2 = (w @ (np.abs(c.points) ** 2)).real / safe_norm
    post_var = np.maximum(post_e2 - np.abs(post_mean) ** 2, 0.0)
    if not np.all(ok):
        fb_mean, fb_var = c.pmf_moments(prior_pmf)
        post_mean = np.where(ok, post_mean, fb_mean)
        post_var = np.where(ok, post_var, fb_var)
    return Gaussian(post_mean, post_var)


def moment_match_damp(
    cavity: Gaussian,
    site_old: Gaussian,
    prior_pmf: np.ndarray,
    params: EpParams,
    c: Constellation,
    diag: EpDiagnostics | None = None,
) -> Gaussian:
    """One damped moment-matching update of the per-symbol site factors.

    The update runs in four stages, elementwise over symbols:

    1. tilted moments with the variance floored at ``params.epsilon``;
    2. candidate site = tilted / cavity, formed directly in natural
       parameters so an exact variance tie stays finite;
    3. damping of the natural parameters with weight ``params.beta``;
    4. negative-variance control: non-positive damped precision either keeps
       the previous site (``"keep"``) or flips the variance sign while
       keeping the damped mean (``"abs"``).  An exactly zero damped precision
       keeps the previous site under both policies.

    Returns
    -------
    Gaussian
        Updated sites; under ``"keep"`` control all variances stay positive
        whenever ``site_old``'s were.
    """
    if params.beta == 0.0:
        return site_old.copy()
    tilted = tilted_moments(cavity, prior_pmf, c)
    var_t = np.maximum(params.epsilon, tilted.variance)
    cav_var = np.broadcast_to(
        np.atleast_1d(cavity.variance), np.atleast_1d(cavity.mean).shape
    )
    cav_mean = np.atleast_1d(cavity.mean)

    prec_cand = 1.0 / var_t - 1.0 / cav_var
    shift_cand = tilted.mean / var_t - cav_mean / cav_var
    prec_old = 1.0 / site_old.variance
    shift_old = site_old.mean / site_old.variance
    prec = params.beta * prec_cand + (1.0 - params.beta) * prec_old
    shift = params.beta * shift_cand + (1.0 - params.beta) * shift_old

    positive = prec > 0
    negative = prec < 0
    n_bad = int(np.count_nonzero(~positive))
    if diag is not None and n_bad:
        diag.control_triggers += n_bad

    with np.errstate(divide="ignore", invalid="ignore"):
        raw_var = np.where(prec != 0, 1.0 / prec, np.inf)
        raw_mean = np.where(prec != 0, shift / prec, 0.0)
    if params.variance_control == "abs":
        new_var = np.where(negative, -raw_var, raw_var)
        new_mean = raw_mean
        keep = prec == 0
    else:
        new_var = raw_var
        new_mean = raw_mean
        keep = ~positive
    out_var = np.where(keep, site_old.variance, new_var)
    out_mean = np.where(keep, site_old.mean, new_mean)
    return Gaussian(out_mean, out_var)


def project_prior(
    prior_pmf: np.ndarray, c: Constellation, epsilon: float = DEFAULT_EPSILON
) -> Gaussian:
    """Project discrete priors onto Gaussians with an ``epsilon`` variance floor."""
    mean, var = c.pmf_moments(prior_pmf)
    return Gaussian(mean, np.maximum(var, epsilon))


def outer_ep_init(
    prior_pmf: np.ndarray,
    extrinsic_prev: Gaussian | None,
    c: Constellation,
    params: EpParams,
) -> Gaussian:
    """Initialize the site factors for one outer (turbo) iteration.

    With no previous extrinsic available (``extrinsic_prev is None``, the
    flat sentinel of the first turbo pass) this is exactly
    :func:`project_prior`.  Otherwise the tilted distribution built from the
    previous extrinsic and the fresh decoder prior is projected and divided
    by that extrinsic.  Where the division would produce a non-positive
    variance, ``params.variance_control`` decides the repair: ``"keep"``
    falls back to the bare projection, ``"abs"`` keeps the division mean and
    takes the magnitude of its variance.

    Returns
    -------
    Gaussian
        Site initialization with strictly positive variances.
    """
    projected = project_prior(prior_pmf, c, params.epsilon)
    if extrinsic_prev is None:
        return projected
    tilted = tilted_moments(extrinsic_prev, prior_pmf, c)
    var_t = np.maximum(params.epsilon, tilted.variance)
    prev_var = np.broadcast_to(
        np.atleast_1d(extrinsic_prev.variance),
        np.atleast_1d(extrinsic_prev.mean).shape,
    )
    prev_mean = np.atleast_1d(extrinsic_prev.mean)
    prec = 1.0 / var_t - 1.0 / prev_var
    shift = tilted.mean / var_t - prev_mean / prev_var
    if params.variance_control == "abs":
        ok = prec != 0
        prec_mag = np.abs(prec)
        with np.errstate(divide="ignore", invalid="ignore"):
            var = np.where(ok, 1.0 / np.where(ok, prec_mag, 1.0), projected.variance)
            mean = np.where(ok, shift / np.where(ok, prec, 1.0), projected.mean)
        return Gaussian(mean, var)
    ok = prec > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        var = np.where(ok, 1.0 / np.where(ok, prec, 1.0), projected.variance)
        mean = np.where(ok, shift / np.where(ok, prec, 1.0), projected.mean)
    return Gaussian(mean, var)
