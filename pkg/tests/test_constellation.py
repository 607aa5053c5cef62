import math

import numpy as np
import pytest
from scipy.special import logsumexp

from turboep.constellation import Constellation

ORDERS = (2, 4, 16, 64, 128)


@pytest.mark.parametrize("order", ORDERS)
def test_unit_mean_energy(order):
    c = Constellation.qam(order)
    assert c.order == order
    assert c.bits_per_symbol == int(math.log2(order))
    assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0, abs=1e-12)
    assert c.mean_energy == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("order", ORDERS)
def test_labels_distinct_and_complete(order):
    c = Constellation.qam(order)
    keys = {tuple(row) for row in c.labels}
    assert len(keys) == order
    assert c.labels.shape == (order, c.bits_per_symbol)


@pytest.mark.parametrize("order", ORDERS)
def test_modulate_hard_demap_round_trip(order):
    c = Constellation.qam(order)
    rng = np.random.default_rng(order)
    bits = rng.integers(0, 2, size=30 * c.bits_per_symbol).astype(np.uint8)
    symbols = c.modulate(bits)
    assert symbols.shape == (30,)
    np.testing.assert_array_equal(c.hard_demap(symbols), bits)


def test_qpsk_all_zero_label_first_quadrant():
    c = Constellation.qam(4)
    idx = [tuple(row) for row in c.labels].index((0, 0))
    expected = (1.0 + 1.0j) / math.sqrt(2.0)
    assert c.points[idx] == pytest.approx(expected, abs=1e-15)


def test_bpsk_points_and_labels():
    c = Constellation.qam(2)
    np.testing.assert_array_equal(c.modulate(np.array([0, 1])), [1.0 + 0j, -1.0 + 0j])


@pytest.mark.parametrize("order", (4, 16, 64))
def test_square_gray_adjacency(order):
    c = Constellation.qam(order)
    # nearest horizontal/vertical neighbors differ in exactly one label bit
    gap = np.min(np.abs(c.points[0] - np.delete(c.points, 0)))
    for i in range(order):
        for j in range(i + 1, order):
            if abs(c.points[i] - c.points[j]) < gap * 1.001:
                assert np.sum(c.labels[i] != c.labels[j]) == 1


def test_cross_constellation_shape():
    c = Constellation.qam(128)
    assert len(set(np.round(c.points, 12))) == 128
    spread_i = np.ptp(c.points.real)
    spread_q = np.ptp(c.points.imag)
    assert spread_i == pytest.approx(spread_q, rel=1e-12)


def test_unsupported_order_rejected():
    with pytest.raises(ValueError):
        Constellation.qam(8)
    with pytest.raises(ValueError):
        Constellation.qam(32)


def test_modulate_rejects_ragged_bits():
    c = Constellation.qam(16)
    with pytest.raises(ValueError):
        c.modulate(np.zeros(7, dtype=np.uint8))


@pytest.mark.parametrize("order", ORDERS)
def test_zero_llrs_give_uniform_pmf(order):
    c = Constellation.qam(order)
    pmf = c.prior_pmf_from_llrs(np.zeros((5, c.bits_per_symbol)))
    np.testing.assert_allclose(pmf, 1.0 / order, atol=1e-14)


def test_prior_pmf_single_bit_value():
    c = Constellation.qam(2)
    pmf = c.prior_pmf_from_llrs(np.array([[5.0]]))
    assert pmf[0, 0] == pytest.approx(0.9933071490757153, abs=1e-15)
    assert pmf[0, 1] == pytest.approx(1.0 - 0.9933071490757153, abs=1e-15)


def test_prior_pmf_product_rule():
    c = Constellation.qam(16)
    rng = np.random.default_rng(4)
    llrs = rng.normal(0, 2, size=(8, 4))
    pmf = c.prior_pmf_from_llrs(llrs)
    p0 = 1.0 / (1.0 + np.exp(-llrs))
    for n in range(8):
        for m in range(16):
            ref = np.prod(np.where(c.labels[m] == 0, p0[n], 1.0 - p0[n]))
            assert pmf[n, m] == pytest.approx(ref, rel=1e-12)
    np.testing.assert_allclose(pmf.sum(axis=1), 1.0, atol=1e-12)


def test_prior_pmf_rejects_nonfinite():
    c = Constellation.qam(4)
    with pytest.raises(ValueError):
        c.prior_pmf_from_llrs(np.array([[np.inf, 0.0]]))


def test_two_point_llr_closed_form():
    c = Constellation.qam(2)
    mu, var = 0.3 + 0.2j, 0.7
    llr = c.extrinsic_llrs_from_gaussian(np.array([mu]), np.array([var]))
    assert llr[0, 0] == pytest.approx(4.0 * mu.real / var, rel=1e-12)


def test_llr_demap_matches_direct_enumeration(qam16):
    rng = np.random.default_rng(9)
    mu = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    var = rng.uniform(0.3, 2.0, 6)
    llrs = qam16.extrinsic_llrs_from_gaussian(mu, var)
    logw = -np.abs(mu[:, None] - qam16.points[None, :]) ** 2 / var[:, None]
    for j in range(4):
        ones = qam16.labels[:, j].astype(bool)
        ref = logsumexp(logw[:, ~ones], axis=1) - logsumexp(logw[:, ones], axis=1)
        np.testing.assert_allclose(llrs[:, j], ref, atol=1e-12)


@pytest.mark.parametrize("order", (4, 16))
def test_llr_reflection_antisymmetry(order):
    # reflecting the I axis negates the first label bit's LLR and
    # leaves every other bit's LLR unchanged
    c = Constellation.qam(order)
    rng = np.random.default_rng(order + 1)
    mu = rng.standard_normal(40) + 1j * rng.standard_normal(40)
    var = rng.uniform(0.2, 3.0, 40)
    base = c.extrinsic_llrs_from_gaussian(mu, var)
    refl = c.extrinsic_llrs_from_gaussian(-np.conj(mu), var)
    np.testing.assert_allclose(refl[:, 0], -base[:, 0], atol=1e-10)
    np.testing.assert_allclose(refl[:, 1:], base[:, 1:], atol=1e-10)


def test_llr_demap_rejects_bad_variance(qam16):
    with pytest.raises(ValueError):
        qam16.extrinsic_llrs_from_gaussian(np.array([0.1 + 0j]), np.array([0.0]))


def test_pmf_moments_uniform(qam64):
    pmf = np.full((3, 64), 1.0 / 64)
    mean, var = qam64.pmf_moments(pmf)
    np.testing.assert_allclose(mean, 0.0, atol=1e-14)
    np.testing.assert_allclose(var, 1.0, atol=1e-12)


def test_pmf_moments_point_mass(qam16):
    pmf = np.zeros((1, 16))
    pmf[0, 5] = 1.0
    mean, var = qam16.pmf_moments(pmf)
    assert mean[0] == pytest.approx(qam16.points[5], abs=1e-15)
    assert var[0] == pytest.approx(0.0, abs=1e-15)
