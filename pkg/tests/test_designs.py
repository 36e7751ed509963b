import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import esp_coeffs
from scipy.special import comb

from sdmimo.designs import (
    UNBOUNDED,
    InfeasibleAmplitudeError,
    SqnrContext,
    band_stop,
    first_order,
    freq_shifted,
    prop1_rms_bounds,
    prop1_upper,
    prop2_bounds,
    rnsr,
    second_order,
    sqnr,
    with_max_amplitude,
    zero_noise_coeffs,
)
from sdmimo.sigma_delta import FilterDesign, iq_norm1, shaping_response

omega_lists = st.lists(st.floats(-np.pi, np.pi), min_size=1, max_size=10)


def test_closed_form_amplitudes():
    assert first_order(2).amplitude == 1
    assert second_order(4).amplitude == 1
    d = freq_shifted(0.0, 3)
    np.testing.assert_allclose(d.coeffs, [-1])
    assert d.amplitude == 2
    assert freq_shifted(np.pi / 4, 3).amplitude == pytest.approx(3 - np.sqrt(2))
    with pytest.raises(InfeasibleAmplitudeError):
        second_order(3)
    with pytest.raises(InfeasibleAmplitudeError):
        with_max_amplitude([-1.0], 1 + 0)  # M = 1 leaves nothing
    with pytest.raises(ValueError):
        freq_shifted(4.0, 3)


def test_band_stop_examples():
    np.testing.assert_allclose(band_stop(2, 0.0), [-2, 1])
    np.testing.assert_allclose(band_stop(1, np.pi / 2), [-1j], atol=1e-15)
    g = band_stop(3, 0.0)
    np.testing.assert_allclose(g, [-3, 3, -1])
    assert iq_norm1(g) == 7
    with pytest.raises(ValueError):
        band_stop(0, 0.0)


@pytest.mark.parametrize("L", range(1, 9))
def test_band_stop_signed_binomials_exact(L):
    ls = np.arange(1, L + 1)
    assert np.array_equal(band_stop(L, 0.0), (-1.0) ** ls * comb(L, ls, exact=False))


@given(st.integers(1, 8), st.floats(-np.pi, np.pi))
def test_band_stop_bracket_and_notch(L, wc):
    g = band_stop(L, wc)
    lo, hi = prop2_bounds(L)
    n = iq_norm1(g)
    assert lo - 1e-9 <= n <= hi + 1e-9
    assert abs(shaping_response(g, wc)) < 1e-9


def test_zero_noise_examples():
    np.testing.assert_allclose(zero_noise_coeffs([0.0]), [-1])
    np.testing.assert_allclose(zero_noise_coeffs([0.0, 0.0]), [-2, 1])
    g = zero_noise_coeffs([np.pi / 3, -np.pi / 3])
    assert np.max(np.abs(shaping_response(g, [np.pi / 3, -np.pi / 3]))) < 1e-12
    with pytest.raises(ValueError):
        zero_noise_coeffs([])


@given(omega_lists)
def test_zero_noise_matches_subset_sums(ws):
    np.testing.assert_allclose(zero_noise_coeffs(ws), esp_coeffs(ws), rtol=0, atol=1e-9)
    assert np.max(np.abs(shaping_response(zero_noise_coeffs(ws), ws))) < 1e-9


def test_zero_noise_batch_rows():
    w = np.random.default_rng(0).uniform(-np.pi, np.pi, (5, 4))
    batch = zero_noise_coeffs(w)
    for row, g in zip(w, batch):
        np.testing.assert_array_equal(g, zero_noise_coeffs(row))


@pytest.mark.parametrize("k", range(1, 9))
def test_prop1_upper_holds_on_random_draws(k):
    w = np.random.default_rng(k).uniform(-np.pi, np.pi, (10_000, k))
    g = zero_noise_coeffs(w)
    norms = np.abs(g.real).sum(axis=1) + np.abs(g.imag).sum(axis=1)
    assert norms.max() <= prop1_upper(k) + 1e-9


@pytest.mark.parametrize("k", range(1, 9))
def test_all_nulls_at_quarter_pi(k):
    # odd powers of e^{j pi/4} have |Re| + |Im| = sqrt(2), even powers have 1
    expected = math.sqrt(2) * 2 ** (k - 1) + 2 ** (k - 1) - 1
    n = iq_norm1(zero_noise_coeffs([np.pi / 4] * k))
    assert n == pytest.approx(expected, abs=1e-9)
    assert n <= prop1_upper(k) + 1e-12
    if k == 1:
        assert n == pytest.approx(prop1_upper(1), abs=1e-12)


def test_bound_helpers():
    assert prop1_upper(3) == pytest.approx(9.8995, abs=1e-4)
    assert prop2_bounds(1) == (1, pytest.approx(np.sqrt(2)))
    assert prop2_bounds(2) == (3, pytest.approx(3 * np.sqrt(2)))
    assert prop1_rms_bounds(3) == (2.0, 8.0)
    for f in (prop1_upper, prop2_bounds, prop1_rms_bounds):
        with pytest.raises(ValueError):
            f(0)


def test_sqnr_examples():
    n = 64
    quiet = SqnrContext(rho=2.0, noise_var=0.0, n_effective=n)
    assert sqnr(first_order(3), quiet, 1.0, 0.0) == UNBOUNDED
    ctx = SqnrContext(rho=2.0, noise_var=0.5, n_effective=n)
    d = first_order(3)
    assert sqnr(d, ctx, 0.7j, 0.0) == pytest.approx(2.0 * 0.49 * d.amplitude**2 / 0.5)
    flat = FilterDesign([0.0], 1.5, 3)
    assert sqnr(flat, quiet, 0.3, 1.1) == pytest.approx(3 * 1.5**2 / (2 * n))
    assert min(UNBOUNDED, 1e300) == 1e300


@given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(-3, 3))
def test_sqnr_monotone(a1, a2, w):
    ctx = SqnrContext(rho=1.3, noise_var=0.2, n_effective=32)
    g = [-0.4 + 0.1j]
    s1, s2 = sqnr(FilterDesign(g, a1, 9), ctx, 0.8, w), sqnr(FilterDesign(g, a2, 9), ctx, 0.8, w)
    if a1 < a2:
        assert s1 < s2
    # larger |1 + G| at the same A never helps
    weak, strong = FilterDesign([0.1], 1.0, 9), FilterDesign([0.9], 1.0, 9)
    if abs(shaping_response(weak, w)) <= abs(shaping_response(strong, w)):
        assert sqnr(weak, ctx, 0.8, w) >= sqnr(strong, ctx, 0.8, w)


def test_sqnr_context_validation_and_gamma():
    ctx = SqnrContext(rho=2.0, noise_var=1.0, n_effective=10)
    assert ctx.gamma(0.5) == pytest.approx(3 / (2 * 10 * 2.0 * 0.25))
    with pytest.raises(ValueError):
        SqnrContext(rho=0.0, noise_var=1.0, n_effective=10)
    with pytest.raises(ValueError):
        SqnrContext(rho=1.0, noise_var=-1.0, n_effective=10)


def test_rnsr_examples():
    assert rnsr(first_order(2), 0.0, 0.25) == 0
    edge = np.pi / 2 - 1e-7
    assert rnsr(first_order(2), edge, 0.5) == pytest.approx(4, abs=1e-9)
    assert rnsr(second_order(4), edge, 0.5) == pytest.approx(16, abs=1e-9)
    th = np.linspace(-1.2, 1.2, 41)
    np.testing.assert_allclose(rnsr(second_order(5), th, 0.25), rnsr(second_order(5), -th, 0.25))
