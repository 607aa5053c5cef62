import numpy as np
import pytest

from turboep.channel import ChannelRealization, convolution_matrix
from turboep.constellation import Constellation
from turboep.ep_core import EpDiagnostics, EpParams, Gaussian
from turboep.equalizers import (
    WindowSpec,
    block_marginals,
    equalize,
    kalman_smoother_marginals,
    windowed_marginals,
)


def dense_marginals(y, ch, factors, n):
    """Straightforward dense-matrix reference for the posterior moments."""
    h_mat = convolution_matrix(ch, n)
    a = ch.noise_variance * np.eye(y.size) + (h_mat * factors.variance) @ h_mat.conj().T
    a_inv = np.linalg.inv(a)
    resid = y - h_mat @ factors.mean
    corr = h_mat.conj().T @ (a_inv @ resid)
    quad = np.einsum("ij,ji->i", h_mat.conj().T, a_inv @ h_mat).real
    mean = factors.mean + factors.variance * corr
    var = factors.variance - factors.variance**2 * quad
    return mean, var


def windowed_dense_reference(y, ch, factors, n, spec):
    """Per-symbol truncated solve against the dense observation matrix."""
    h_mat = convolution_matrix(ch, n)
    a = ch.noise_variance * np.eye(y.size) + (h_mat * factors.variance) @ h_mat.conj().T
    resid = y - h_mat @ factors.mean
    mean = np.empty(n, complex)
    var = np.empty(n)
    for k in range(n):
        rows = np.arange(
            k - spec.center_offset, k - spec.center_offset + spec.window_length
        )
        rows = rows[(rows >= 0) & (rows < y.size)]
        sub = a[np.ix_(rows, rows)]
        hk = h_mat[rows, k]
        sol = np.linalg.solve(sub, np.stack([resid[rows], hk], axis=1))
        mean[k] = factors.mean[k] + factors.variance[k] * (hk.conj() @ sol[:, 0])
        var[k] = factors.variance[k] - factors.variance[k] ** 2 * (
            hk.conj() @ sol[:, 1]
        ).real
    return mean, var


def random_instance(rng, order=16, n_max=64, l_max=8):
    c = Constellation.qam(order)
    n = int(rng.integers(2, n_max + 1))
    l = int(rng.integers(1, l_max + 1))
    taps = rng.standard_normal(l) + 1j * rng.standard_normal(l)
    taps /= np.linalg.norm(taps)
    ch = ChannelRealization(taps, float(rng.uniform(0.02, 1.0)))
    pmf = rng.dirichlet(np.ones(order) * 0.7, size=n)
    mean, var = c.pmf_moments(pmf)
    factors = Gaussian(mean, np.maximum(var, 1e-8))
    sym = c.points[rng.integers(0, order, n)]
    h_mat = convolution_matrix(ch, n)
    noise = np.sqrt(ch.noise_variance / 2) * (
        rng.standard_normal(n + l - 1) + 1j * rng.standard_normal(n + l - 1)
    )
    return c, ch, factors, pmf, h_mat @ sym + noise, n


def test_block_matches_dense_reference():
    rng = np.random.default_rng(100)
    for _ in range(25):
        _, ch, factors, _, y, n = random_instance(rng)
        got = block_marginals(y, ch, factors)
        mean, var = dense_marginals(y, ch, factors, n)
        np.testing.assert_allclose(got.posteriors.mean, mean, atol=1e-10)
        np.testing.assert_allclose(got.posteriors.variance, var, atol=1e-10)


def test_kalman_matches_block():
    rng = np.random.default_rng(101)
    for _ in range(25):
        _, ch, factors, _, y, n = random_instance(rng)
        blk = block_marginals(y, ch, factors)
        kal = kalman_smoother_marginals(y, ch, factors)
        np.testing.assert_allclose(kal.posteriors.mean, blk.posteriors.mean, atol=1e-9)
        np.testing.assert_allclose(
            kal.posteriors.variance, blk.posteriors.variance, atol=1e-9
        )


def test_windowed_matches_truncated_dense_solve():
    rng = np.random.default_rng(102)
    for _ in range(25):
        _, ch, factors, _, y, n = random_instance(rng)
        spec = WindowSpec.default_for(ch.memory)
        got = windowed_marginals(y, ch, factors, spec)
        mean, var = windowed_dense_reference(y, ch, factors, n, spec)
        np.testing.assert_allclose(got.posteriors.mean, mean, atol=1e-10)
        np.testing.assert_allclose(got.posteriors.variance, var, atol=1e-10)


def test_frame_shorter_than_channel_memory():
    rng = np.random.default_rng(103)
    taps = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    taps /= np.linalg.norm(taps)
    ch = ChannelRealization(taps, 0.2)
    factors = Gaussian(np.zeros(2, complex), np.ones(2))
    y = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    blk = block_marginals(y, ch, factors)
    kal = kalman_smoother_marginals(y, ch, factors)
    np.testing.assert_allclose(kal.posteriors.mean, blk.posteriors.mean, atol=1e-9)
    win = windowed_marginals(y, ch, factors, WindowSpec.default_for(8))
    mean, _ = windowed_dense_reference(y, ch, factors, 2, WindowSpec.default_for(8))
    np.testing.assert_allclose(win.posteriors.mean, mean, atol=1e-10)


def test_posterior_variance_bounds():
    rng = np.random.default_rng(104)
    for _ in range(25):
        _, ch, factors, _, y, _ = random_instance(rng)
        got = block_marginals(y, ch, factors)
        assert np.all(got.posteriors.variance > 0)
        assert np.all(got.posteriors.variance <= factors.variance + 1e-12)


def test_extrinsic_times_factor_reassembles_posterior():
    rng = np.random.default_rng(105)
    for _ in range(10):
        _, ch, factors, _, y, _ = random_instance(rng)
        got = block_marginals(y, ch, factors)
        prec = 1.0 / got.extrinsics.variance + 1.0 / factors.variance
        mean = (
            got.extrinsics.mean / got.extrinsics.variance
            + factors.mean / factors.variance
        ) / prec
        np.testing.assert_allclose(1.0 / prec, got.posteriors.variance, atol=1e-10)
        np.testing.assert_allclose(mean, got.posteriors.mean, atol=1e-10)


def test_near_certain_sites_pin_posterior():
    c = Constellation.qam(4)
    rng = np.random.default_rng(106)
    sym = c.points[rng.integers(0, 4, 32)]
    taps = np.array([0.9, 0.4 - 0.2j])
    taps /= np.linalg.norm(taps)
    ch = ChannelRealization(taps, 0.05)
    y = np.convolve(sym, ch.taps)
    factors = Gaussian(sym.copy(), np.full(32, 1e-8))
    got = block_marginals(y, ch, factors)
    np.testing.assert_allclose(got.posteriors.mean, sym, atol=1e-5)


def test_observation_length_checked():
    ch = ChannelRealization(np.array([1.0, 0.3]), 0.1)
    factors = Gaussian(np.zeros(4, complex), np.ones(4))
    for backend in (block_marginals, kalman_smoother_marginals):
        with pytest.raises(ValueError):
            backend(np.zeros(4, dtype=complex), ch, factors)
    with pytest.raises(ValueError):
        windowed_marginals(
            np.zeros(4, dtype=complex), ch, factors, WindowSpec.default_for(2)
        )


def test_window_spec_validation():
    with pytest.raises(ValueError):
        WindowSpec(window_length=0, center_offset=0)
    with pytest.raises(ValueError):
        WindowSpec(window_length=4, center_offset=4)
    spec = WindowSpec.default_for(7)
    assert spec.window_length == 21
    assert spec.center_offset == 7


def test_equalize_unknown_backend():
    rng = np.random.default_rng(107)
    c, ch, factors, pmf, y, _ = random_instance(rng)
    with pytest.raises(ValueError):
        equalize(y, ch, factors, pmf, c, EpParams(), backend="dense")


def test_equalize_counts_passes():
    rng = np.random.default_rng(108)
    c, ch, factors, pmf, y, _ = random_instance(rng)
    for s in (0, 2, 4):
        diag = EpDiagnostics()
        equalize(
            y, ch, factors, pmf, c,
            EpParams(beta=0.5, inner_iters=s), diag=diag,
        )
        assert diag.extrinsic_passes == s + 1


def test_single_pass_ignores_variance_control():
    rng = np.random.default_rng(109)
    c, ch, _, _, y, n = random_instance(rng)
    uniform = np.full((n, c.order), 1.0 / c.order)
    mean, var = c.pmf_moments(uniform)
    outs = []
    for control in ("keep", "abs"):
        factors = Gaussian(mean.copy(), np.maximum(var, 1e-8))
        outs.append(
            equalize(
                y, ch, factors, uniform, c,
                EpParams(inner_iters=0, variance_control=control),
            )
        )
    np.testing.assert_array_equal(outs[0].extrinsics.mean, outs[1].extrinsics.mean)
    np.testing.assert_array_equal(
        outs[0].extrinsics.variance, outs[1].extrinsics.variance
    )


def test_inner_sweeps_refine_hard_decisions():
    c = Constellation.qam(16)
    rng = np.random.default_rng(110)
    sym = c.points[rng.integers(0, 16, 48)]
    taps = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    taps /= np.linalg.norm(taps)
    ch = ChannelRealization(taps, 0.05)
    y = np.convolve(sym, ch.taps) + np.sqrt(0.025) * (
        rng.standard_normal(52) + 1j * rng.standard_normal(52)
    )
    uniform = np.full((48, 16), 1.0 / 16)
    mean, var = c.pmf_moments(uniform)
    errors = []
    for s in (0, 3):
        factors = Gaussian(mean.copy(), var.copy())
        out = equalize(
            y, ch, factors, uniform, c, EpParams(beta=0.7, inner_iters=s)
        )
        errors.append(np.sum(c.hard_demap(out.posteriors.mean) != c.hard_demap(sym)))
    assert errors[1] <= errors[0]
