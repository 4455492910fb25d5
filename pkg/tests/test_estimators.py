"""
Tests for the conventional channel estimators (LS, DPA, STA, TRFI)
"""

import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from xai_chest.models.estimation_models import EstimatorKind, EstimatorState, StaParams
from xai_chest.services.estimation_service import (
    conventional_step,
    dpa_step,
    frequency_average,
    interpolate_unreliable,
    ls_preamble,
    run_conventional,
    sta_estimate,
    time_average,
    trfi_estimate,
    trfi_step,
)
from xai_chest.services.phy_service import build_frame, map_bits, preamble_symbol
from xai_chest.utils.errors import DegenerateInputError, SizeError

pytestmark = pytest.mark.unit


def _smooth_channel(spec):
    """Slowly varying response over the signed subcarrier axis"""
    k = spec.subcarriers.astype(float)
    return (1.0 + 0.3 * np.cos(k / 9.0)) * np.exp(1j * k / 15.0)


def _frame(spec, scheme, rng):
    bits = rng.integers(0, 2, spec.n_symbols * spec.k_data * scheme.bits_per_symbol)
    return build_frame(map_bits(bits, scheme), spec)


def test_ls_noiseless_flat(spec):
    """Test LS on an all-ones channel without noise"""
    known = preamble_symbol(spec)
    np.testing.assert_allclose(ls_preamble(np.vstack([known, known]), known), np.ones(spec.k_on))


def test_ls_averages_noise(spec, rng):
    """Test two noisy preambles give h + (n1 + n2) / (2x)"""
    known = preamble_symbol(spec)
    h = _smooth_channel(spec)
    n1 = 0.1 * (rng.standard_normal(spec.k_on) + 1j * rng.standard_normal(spec.k_on))
    n2 = 0.1 * (rng.standard_normal(spec.k_on) + 1j * rng.standard_normal(spec.k_on))
    rx = np.vstack([h * known + n1, h * known + n2])
    np.testing.assert_allclose(ls_preamble(rx, known), h + (n1 + n2) / (2 * known), atol=1e-12)


def test_ls_single_preamble(spec):
    """Test rx = 2 * known gives an all-2 estimate"""
    known = preamble_symbol(spec)
    np.testing.assert_allclose(ls_preamble(2 * known, known), 2 * np.ones(spec.k_on))


def test_ls_rejects_zero_known_value(spec):
    """Test a zero in the known preamble is rejected"""
    known = np.array(preamble_symbol(spec))
    known[3] = 0
    with pytest.raises(DegenerateInputError):
        ls_preamble(np.ones((1, spec.k_on)), known)
    with pytest.raises(SizeError):
        ls_preamble(np.ones((1, spec.k_on - 1)), preamble_symbol(spec))


def test_dpa_fixed_point(spec, scheme, rng):
    """Test DPA on a noiseless channel with h_prev = h returns h and the sent symbols"""
    h = _smooth_channel(spec)
    s = _frame(spec, scheme, rng)[0]
    h_dpa, d = dpa_step(h * s, h, scheme, spec)
    np.testing.assert_array_equal(d, s)
    np.testing.assert_allclose(h_dpa, h, atol=1e-12)


def test_dpa_tolerates_small_perturbation(spec, qpsk, rng):
    """Test a perturbed h_prev within the decision regions still recovers h"""
    h = _smooth_channel(spec)
    s = _frame(spec, qpsk, rng)[0]
    delta = 0.1 * np.exp(2j * np.pi * rng.random(spec.k_on))
    h_dpa, _ = dpa_step(h * s, h * (1 + delta), qpsk, spec)
    np.testing.assert_allclose(h_dpa, h, atol=1e-12)


def test_dpa_rejects_zero_reference(spec, qpsk):
    """Test a zero entry in h_prev is rejected"""
    h_prev = np.ones(spec.k_on, dtype=complex)
    h_prev[10] = 0
    with pytest.raises(DegenerateInputError):
        dpa_step(np.ones(spec.k_on), h_prev, qpsk, spec)


def test_frequency_average_window():
    """Test the interior window mean and the truncated edge window"""
    h = np.arange(1, 11, dtype=complex)
    out = frequency_average(h, beta=2)
    assert out[2] == pytest.approx(3.0)
    assert out[0] == pytest.approx(2.0)
    assert out[9] == pytest.approx(9.0)


def test_frequency_average_weights_sum_to_one():
    """Test constants are preserved at every subcarrier including edges"""
    for beta in range(0, 5):
        np.testing.assert_allclose(frequency_average(np.full(52, 2 - 1j), beta), 2 - 1j)


def test_time_average():
    """Test alpha = 1 keeps only the new estimate and alpha = 2 averages"""
    prev, new = np.array([1.0 + 0j]), np.array([3.0 + 0j])
    np.testing.assert_allclose(time_average(prev, new, 1.0), new)
    np.testing.assert_allclose(time_average(prev, new, 2.0), [2.0])


def test_sta_preserves_constant_channel(spec, qpsk, rng):
    """Test STA on a constant channel with matching history returns that constant"""
    c = 0.8 - 0.3j
    s = _frame(spec, qpsk, rng)[0]
    h = sta_estimate(c * s, np.full(spec.k_on, c), StaParams(), qpsk, spec)
    np.testing.assert_allclose(h, c, atol=1e-12)


def test_sta_is_convex_combination_of_inputs(spec, qpsk, rng):
    """Test STA output on real channels stays within its inputs and matches the alpha = beta = 2 window mean"""
    params = StaParams()
    assert (params.alpha, params.beta) == (2.0, 2)
    for _ in range(5):
        h = rng.uniform(0.5, 1.5, spec.k_on)
        h_sta_prev = rng.uniform(-1.0, 2.0, spec.k_on)
        s = _frame(spec, qpsk, rng)[0]
        out = sta_estimate(h * s, h_sta_prev, params, qpsk, spec, h_dpa_prev=h)

        lo = min(h.min(), h_sta_prev.min())
        hi = max(h.max(), h_sta_prev.max())
        assert np.all(out.real >= lo - 1e-12) and np.all(out.real <= hi + 1e-12)
        np.testing.assert_allclose(out.imag, 0.0, atol=1e-12)

        window = np.array([h[max(0, k - 2):k + 3].mean() for k in range(spec.k_on)])
        np.testing.assert_allclose(out, 0.5 * h_sta_prev + 0.5 * window, atol=1e-12)


def test_sta_large_alpha_holds_initial_estimate(short_spec, qpsk, rng):
    """Test 1/alpha -> 0 keeps the LS estimate across the frame"""
    h = _smooth_channel(short_spec)
    h_ls = 1.05 * h
    rx = h * _frame(short_spec, qpsk, rng)
    estimates = run_conventional(rx, h_ls, EstimatorKind.STA, StaParams(alpha=1e12), qpsk, short_spec)
    np.testing.assert_allclose(estimates, np.broadcast_to(h_ls, estimates.shape), atol=1e-9)


def test_sta_track_selects_dpa_reference(spec, qpsk, rng):
    """Test sta_track='dpa' feeds the DPA track rather than the STA output"""
    h = _smooth_channel(spec)
    s = _frame(spec, qpsk, rng)[0]
    state = EstimatorState(h_prev=h, h_sta_prev=h)
    _, next_state = conventional_step(EstimatorKind.STA, h * s, state, qpsk, spec, StaParams(sta_track="dpa"))
    np.testing.assert_allclose(next_state.h_prev, h, atol=1e-12)
    assert not np.allclose(next_state.h_sta_prev, h)


def test_trfi_noiseless_all_reliable(spec, qpsk, rng):
    """Test TRFI on a noiseless static channel marks everything reliable and returns h"""
    h = _smooth_channel(spec)
    frame = _frame(spec, qpsk, rng)
    out = trfi_step(h * frame[1], h * frame[0], h, qpsk, spec)
    assert out.reliable.all()
    assert not out.fell_back
    np.testing.assert_allclose(out.estimate, h, atol=1e-12)
    np.testing.assert_array_equal(trfi_estimate(h * frame[1], h * frame[0], h, qpsk, spec), out.estimate)


def test_interpolation_of_one_unreliable_subcarrier(spec):
    """Test a single unreliable subcarrier is replaced by the cubic spline of the rest"""
    h = _smooth_channel(spec)
    reliable = np.ones(spec.k_on, dtype=bool)
    reliable[20] = False
    corrupted = h.copy()
    corrupted[20] = 5.0
    out = interpolate_unreliable(corrupted, reliable, spec.subcarriers)

    x = spec.subcarriers.astype(float)
    re = CubicSpline(x[reliable], h[reliable].real)(x[20])
    im = CubicSpline(x[reliable], h[reliable].imag)(x[20])
    assert out[20] == pytest.approx(re + 1j * im, abs=1e-9)
    np.testing.assert_array_equal(out[reliable], corrupted[reliable])


def test_interpolation_through_four_pilots(spec):
    """Test with only the pilots reliable the data follow the cubic through them"""
    h = _smooth_channel(spec)
    reliable = np.zeros(spec.k_on, dtype=bool)
    reliable[spec.pilot_indices] = True
    out = interpolate_unreliable(h, reliable, spec.subcarriers)

    x = spec.subcarriers.astype(float)
    xp = x[spec.pilot_indices]
    expected = np.polyval(np.polyfit(xp, h[spec.pilot_indices].real, 3), x) + 1j * np.polyval(
        np.polyfit(xp, h[spec.pilot_indices].imag, 3), x
    )
    np.testing.assert_allclose(out[spec.data_indices], expected[spec.data_indices], rtol=1e-9, atol=1e-9)


def test_interpolation_needs_four_points(spec):
    """Test fewer than four reliable subcarriers are rejected"""
    reliable = np.zeros(spec.k_on, dtype=bool)
    reliable[:3] = True
    with pytest.raises(DegenerateInputError):
        interpolate_unreliable(np.ones(spec.k_on), reliable, spec.subcarriers)


@pytest.mark.parametrize("kind", [EstimatorKind.DPA, EstimatorKind.TRFI])
def test_full_frame_tracking_on_static_channel(short_spec, qpsk, rng, kind):
    """Test DPA and TRFI track a noiseless static channel exactly"""
    h = _smooth_channel(short_spec)
    rx = h * _frame(short_spec, qpsk, rng)
    estimates = run_conventional(rx, h, kind, StaParams(), qpsk, short_spec)
    assert estimates.shape == (short_spec.n_symbols, short_spec.k_on)
    np.testing.assert_allclose(estimates, np.broadcast_to(h, estimates.shape), atol=1e-12)


def test_conventional_step_accepts_names(short_spec, qpsk, rng):
    """Test estimator kinds given as strings"""
    h = _smooth_channel(short_spec)
    y = h * _frame(short_spec, qpsk, rng)[0]
    est, state = conventional_step("DPA", y, EstimatorState.from_preamble(h), qpsk, short_spec)
    np.testing.assert_allclose(est, h, atol=1e-12)
    assert state.y_prev is not None
