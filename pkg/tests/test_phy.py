"""
Tests for the physical layer: constellations, frame layout, OFDM and the HPA
"""

import numpy as np
import pytest

from xai_chest.models.phy_models import HpaKind, HpaModel, TimeSignal
from xai_chest.services.phy_service import (
    bpsk_points,
    bussgang_decompose,
    build_frame,
    calibrate_hpa,
    demap_nearest,
    extract_data,
    hpa_apply,
    make_frame_spec,
    make_scheme,
    map_bits,
    ofdm_demodulate,
    ofdm_modulate,
    preamble_symbol,
)
from xai_chest.utils.errors import DegenerateInputError, SizeError

pytestmark = pytest.mark.unit


def test_qpsk_zero_bits_map_to_first_quadrant(qpsk):
    """Test QPSK codeword 00 maps to (+1+1j)/sqrt(2)"""
    point = map_bits(np.array([0, 0]), qpsk)
    assert point.shape == (1,)
    assert point[0] == pytest.approx((1 + 1j) / np.sqrt(2), abs=1e-12)


def test_empty_bits_give_empty_symbols(scheme):
    """Test an empty bit sequence maps to no symbols"""
    assert map_bits(np.array([], dtype=np.int64), scheme).size == 0


def test_bit_count_must_divide(qpsk):
    """Test odd bit counts are rejected for QPSK"""
    with pytest.raises(SizeError):
        map_bits(np.array([0, 1, 1]), qpsk)


def test_constellation_unit_power_and_distinct(scheme):
    """Test every codeword maps to a distinct point and mean power is one"""
    codes = scheme.codewords.ravel()
    points = map_bits(codes, scheme)
    assert points.size == scheme.order
    assert len(set(np.round(points, 12))) == scheme.order
    assert np.mean(np.abs(points) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_gray_neighbours_differ_in_one_bit(scheme):
    """Test nearest-neighbour points carry codewords at Hamming distance one"""
    pts = scheme.points
    dist = np.abs(pts[:, None] - pts[None, :])
    d_min = dist[dist > 0].min()
    words = scheme.codewords
    for i, j in zip(*np.nonzero(np.isclose(dist, d_min, rtol=1e-9))):
        assert np.count_nonzero(words[i] != words[j]) == 1


def test_demap_exact_point_is_identity(scheme):
    """Test demapping a constellation point returns it and its bits"""
    points, bits = demap_nearest(scheme.points, scheme)
    np.testing.assert_array_equal(points, scheme.points)
    np.testing.assert_array_equal(bits, scheme.codewords.ravel())


def test_demap_qpsk_nearest(qpsk):
    """Test (0.9, 0.1) decides to the first-quadrant QPSK point"""
    points, bits = demap_nearest(np.array([0.9 + 0.1j]), qpsk)
    assert points[0] == pytest.approx((1 + 1j) / np.sqrt(2))
    np.testing.assert_array_equal(bits, [0, 0])


def test_demap_tie_prefers_lowest_index():
    """Test a 64QAM midpoint between two points decides to the lower index"""
    scheme = make_scheme("QAM64")
    pts = scheme.points
    inner = np.min(np.abs(pts.real))
    top = pts.imag.max()
    right = int(np.flatnonzero(np.isclose(pts.real, inner) & np.isclose(pts.imag, top))[0])
    left = int(np.flatnonzero(np.isclose(pts.real, -inner) & np.isclose(pts.imag, top))[0])
    midpoint = 0.5 * (pts[right] + pts[left])
    assert midpoint.real == 0.0

    decided, bits = demap_nearest(np.array([midpoint]), scheme)
    winner = min(right, left)
    assert decided[0] == pts[winner]
    np.testing.assert_array_equal(bits, scheme.codewords[winner])


def test_frame_spec_numerology(spec):
    """Test 802.11p active, pilot and data subcarrier layout"""
    assert (spec.k_total, spec.k_on, spec.k_pilot, spec.k_data, spec.k_null) == (64, 52, 4, 48, 12)
    np.testing.assert_array_equal(spec.pilot_indices, [5, 19, 32, 46])
    np.testing.assert_array_equal(spec.subcarriers[spec.pilot_indices], [-21, -7, 7, 21])
    assert 0 not in spec.subcarriers.tolist()
    assert spec.symbol_length == 80


def test_build_frame_places_pilots():
    """Test a one-symbol frame of zero data keeps only the pilots"""
    spec = make_frame_spec(n_symbols=1)
    frame = build_frame(np.zeros(48), spec)
    assert frame.shape == (1, 52)
    np.testing.assert_array_equal(frame[0, spec.pilot_indices], spec.pilot_values)
    assert np.all(frame[0, spec.data_indices] == 0)


def test_build_frame_round_trip(spec, qpsk, rng):
    """Test extracting data subcarriers recovers the data symbols"""
    data = map_bits(rng.integers(0, 2, spec.n_symbols * spec.k_data * 2), qpsk)
    frame = build_frame(data, spec)
    assert frame.shape == (50, 52)
    np.testing.assert_array_equal(extract_data(frame, spec).ravel(), data)


def test_build_frame_wrong_length(spec):
    """Test a short data vector is rejected"""
    with pytest.raises(SizeError):
        build_frame(np.zeros(47), spec)


def test_single_tone_has_constant_modulus(spec):
    """Test one active subcarrier gives samples of modulus 1/sqrt(K)"""
    symbol = np.zeros(spec.k_on, dtype=complex)
    symbol[list(spec.subcarriers).index(1)] = 1.0
    signal = ofdm_modulate(symbol, spec)
    assert len(signal) == spec.symbol_length
    np.testing.assert_allclose(np.abs(signal.samples), 1 / np.sqrt(spec.k_total), atol=1e-12)


def test_zero_symbol_is_silent(spec):
    """Test an all-zero symbol modulates and demodulates to zeros"""
    signal = ofdm_modulate(np.zeros((1, spec.k_on)), spec)
    assert np.all(signal.samples == 0)
    assert np.all(ofdm_demodulate(signal, spec) == 0)


def test_ofdm_round_trip(spec, rng):
    """Test demodulate(modulate(s)) recovers s"""
    symbols = rng.standard_normal((3, spec.k_on)) + 1j * rng.standard_normal((3, spec.k_on))
    signal = ofdm_modulate(symbols, spec)
    assert len(signal) == 3 * spec.symbol_length
    np.testing.assert_allclose(ofdm_demodulate(signal, spec), symbols, atol=1e-10)


def test_ofdm_preserves_energy(spec, rng):
    """Test the unitary IFFT keeps symbol energy outside the cyclic prefix"""
    symbol = rng.standard_normal(spec.k_on) + 1j * rng.standard_normal(spec.k_on)
    samples = ofdm_modulate(symbol, spec).samples[spec.k_cp:]
    assert np.sum(np.abs(samples) ** 2) == pytest.approx(np.sum(np.abs(symbol) ** 2), rel=1e-12)


def test_demodulate_misaligned_length(spec):
    """Test a signal that does not split into whole symbols is rejected"""
    with pytest.raises(SizeError):
        ofdm_demodulate(TimeSignal(samples=np.zeros(81), sample_rate_hz=spec.sample_rate_hz), spec)


def test_preamble_is_bpsk(spec):
    """Test the known preamble is +-1 on every active subcarrier and fixed"""
    pre = preamble_symbol(spec)
    assert pre.shape == (spec.k_on,)
    assert set(np.unique(pre.real)) <= {-1.0, 1.0}
    np.testing.assert_array_equal(pre, preamble_symbol(make_frame_spec()))


def test_bpsk_points_and_data_schemes():
    """Test BPSK maps bit 0 to +1 and is not offered as a data scheme"""
    np.testing.assert_array_equal(bpsk_points(), [1.0, -1.0])
    assert np.mean(np.abs(bpsk_points()) ** 2) == 1.0
    with pytest.raises(ValueError):
        make_scheme("BPSK")


def _constant_modulus(n=256, amplitude=1.0):
    phases = np.exp(2j * np.pi * np.arange(n) / 7.0)
    return TimeSignal(samples=amplitude * phases, sample_rate_hz=10e6)


def test_linear_hpa_is_identity():
    """Test the linear amplifier returns its input"""
    signal = _constant_modulus()
    assert hpa_apply(signal, HpaModel(kind=HpaKind.LINEAR)) is signal


def test_rapp_small_signal_is_linear():
    """Test samples far below saturation pass within 1 percent"""
    signal = _constant_modulus()
    out = hpa_apply(signal, HpaModel(kind=HpaKind.RAPP, ibo_db=30.0))
    np.testing.assert_allclose(out.samples, signal.samples, rtol=1e-2)


def test_rapp_hard_limit_at_saturation():
    """Test amplitude 2x saturation is clipped to the saturation level for p=100"""
    signal = _constant_modulus(amplitude=1.0)
    # A_sat = sqrt(P * 10^(IBO/10)) = 0.5 for unit power
    ibo = 10 * np.log10(0.25)
    out = hpa_apply(signal, HpaModel(kind=HpaKind.RAPP, ibo_db=ibo, smoothness=100.0))
    np.testing.assert_allclose(np.abs(out.samples), 0.5, rtol=1e-6)
    np.testing.assert_allclose(np.angle(out.samples), np.angle(signal.samples), atol=1e-12)


def test_bussgang_identity_and_pure_gain(rng):
    """Test rho for output = input and output = 0.5 * input"""
    x = TimeSignal(samples=rng.standard_normal(100) + 1j * rng.standard_normal(100), sample_rate_hz=1.0)
    rho, distortion = bussgang_decompose(x, x)
    assert rho == pytest.approx(1.0)
    np.testing.assert_allclose(distortion.samples, 0, atol=1e-12)

    half = TimeSignal(samples=0.5 * x.samples, sample_rate_hz=1.0)
    rho, distortion = bussgang_decompose(x, half)
    assert rho == pytest.approx(0.5)
    np.testing.assert_allclose(distortion.samples, 0, atol=1e-12)


def test_bussgang_distortion_is_uncorrelated(rng):
    """Test Rapp distortion at IBO 2 dB is orthogonal to the input"""
    n = 100_000
    x = TimeSignal(samples=(rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2), sample_rate_hz=1.0)
    y = hpa_apply(x, HpaModel(kind=HpaKind.RAPP, ibo_db=2.0))
    rho, distortion = bussgang_decompose(x, y)
    assert abs(rho) < 1.0
    residual = abs(np.vdot(x.samples, distortion.samples)) / np.vdot(x.samples, x.samples).real
    assert residual < 1e-10


def test_bussgang_zero_input():
    """Test zero input power is rejected"""
    zero = TimeSignal(samples=np.zeros(8), sample_rate_hz=1.0)
    with pytest.raises(DegenerateInputError):
        bussgang_decompose(zero, zero)


def test_calibrate_hpa(rng):
    """Test calibration fills rho: 1 for linear, below 1 for Rapp"""
    x = TimeSignal(samples=rng.standard_normal(4096) + 1j * rng.standard_normal(4096), sample_rate_hz=1.0)
    assert calibrate_hpa(HpaModel(), x).rho == 1.0
    rapp = calibrate_hpa(HpaModel(kind=HpaKind.RAPP, ibo_db=2.0), x)
    assert rapp.rho is not None and abs(rapp.rho) < 1.0
