import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import hankel

import oracles
from conftest import complex_gaussian
from radclass import features as F
from radclass import signal_io as sio
from radclass.errors import FeatureError, TooShort, ZeroSignal

N = 1024
t = np.arange(N)


# --- temporal kurtosis -------------------------------------------------------


def test_kurtosis_constant_modulus_is_exactly_one():
    z = 1.7 * np.tile([1, 1j, -1, -1j], 64)
    assert F.temporal_kurtosis(z) == pytest.approx(1.0, rel=1e-14)


def test_kurtosis_on_off_amplitude():
    assert F.temporal_kurtosis(np.tile([0.0, 1.5], 64) + 0j) == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_kurtosis_gaussian(seed):
    z = complex_gaussian(np.random.default_rng(seed), 4096)
    assert abs(F.temporal_kurtosis(z) - 2.0) < 0.1


def test_kurtosis_gaussian_monte_carlo_mean(rng):
    # |z|^2 is exponential: E[a^4] / E[a^2]^2 = 2
    vals = [F.temporal_kurtosis(complex_gaussian(rng, 4096)) for _ in range(40)]
    assert abs(np.mean(vals) - 2.0) < 0.02


def test_kurtosis_zero():
    with pytest.raises(ZeroSignal):
        F.temporal_kurtosis(np.zeros(64, dtype=complex))


# --- singular spectrum entropy --------------------------------------------------


def test_ssa_constant_amplitude():
    assert F.singular_spectrum_entropy(np.full(N, 0.3 + 0.4j)) == 0.0


def test_ssa_pure_tone():
    assert abs(F.singular_spectrum_entropy(np.exp(2j * np.pi * 0.137 * t))) < 1e-9


def _ssa_reference(a, L):
    traj = np.array([[a[i + j] for j in range(len(a) - L + 1)] for i in range(L)])
    s = np.linalg.svd(traj, compute_uv=False)
    p = s / s.sum()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum() / np.log(L))


def test_ssa_noise_above_am_tone(rng):
    noise = complex_gaussian(rng, 4096)
    am = 1 + 0.5 * np.cos(2 * np.pi * 0.01 * np.arange(4096)) + 0j
    h_noise = F.singular_spectrum_entropy(noise)
    h_am = F.singular_spectrum_entropy(am)
    assert 0 < h_am < h_noise < 1
    assert h_noise == pytest.approx(_ssa_reference(np.abs(noise), 64), abs=1e-10)
    assert h_am == pytest.approx(_ssa_reference(np.abs(am), 64), abs=1e-6)


def test_ssa_embed_dim_bounds(rng):
    z = complex_gaussian(rng, 128)
    with pytest.raises(ValueError):
        F.singular_spectrum_entropy(z, embed_dim=1)
    with pytest.raises(ValueError):
        F.singular_spectrum_entropy(z, embed_dim=65)
    assert 0 < F.singular_spectrum_entropy(z, embed_dim=64) <= 1


# --- bispectrum --------------------------------------------------------------


def test_bispectrum_zero_signal():
    assert F.bispectral_integration(np.zeros(N, dtype=complex)) == 0.0


def test_bispectrum_matches_direct_dft(rng):
    z = complex_gaussian(rng, 256)
    assert F.bispectral_integration(z, fft_size=32) == pytest.approx(
        oracles.bispectral_integration_reference(list(z), 32), rel=1e-10
    )


def test_bispectrum_principal_region_shape():
    f1, f2 = F.principal_region(128)
    assert np.all(f2 <= f1) and np.all(f1 + f2 < 64)
    assert len(f1) == sum(1 for a in range(64) for b in range(a + 1) if a + b < 64)


def _triple(rng, coupled, n=8192, fft=128, block=64, bins=(20, 12)):
    tt = np.arange(n)
    idx = np.repeat(np.arange(n // block), block)
    p1, p2, p3 = (rng.uniform(0, 2 * np.pi, n // block)[idx] for _ in range(3))
    if coupled:
        p3 = p1 + p2
    f1, f2 = bins
    return (
        np.exp(1j * (2 * np.pi * f1 * tt / fft + p1))
        + np.exp(1j * (2 * np.pi * f2 * tt / fft + p2))
        + np.exp(1j * (2 * np.pi * (f1 + f2) * tt / fft + p3))
    ) / np.sqrt(3)


def test_bispectrum_phase_coupling(rng):
    coupled = F.bispectral_integration(_triple(rng, True))
    independent = F.bispectral_integration(_triple(rng, False))
    noise = F.bispectral_integration(complex_gaussian(rng, 8192))
    assert coupled > independent
    assert coupled > noise


def test_bispectrum_short_signal_oracle_ordering(rng):
    # same comparison on a short signal, both sides through the DFT oracle
    c = oracles.bispectral_integration_reference(list(_triple(rng, True, 512, 32, 16, (5, 3))), 32)
    i = oracles.bispectral_integration_reference(list(_triple(rng, False, 512, 32, 16, (5, 3))), 32)
    assert c > i


def test_bispectrum_too_short(rng):
    with pytest.raises(TooShort):
        F.bispectral_integration(complex_gaussian(rng, 256), fft_size=128)
    with pytest.raises(TooShort):
        F.bispectral_integration(complex_gaussian(rng, N), n_segments=3)


# --- bandwidth factor ----------------------------------------------------------


def test_bandwidth_pure_tone():
    assert F.bandwidth_factor(np.exp(2j * np.pi * t / 8)) < 0.05


def test_bandwidth_two_tones():
    z = np.exp(2j * np.pi * t / 8) + np.exp(2j * np.pi * 3 * t / 8)
    # point masses at |f| = fs/8 and 3fs/8: centroid fs/4, spread fs/8
    assert F.bandwidth_factor(z) == pytest.approx(0.5, abs=0.05)


def test_bandwidth_noise_exceeds_tone(rng):
    assert F.bandwidth_factor(complex_gaussian(rng, N)) > F.bandwidth_factor(np.exp(2j * np.pi * t / 8))


def test_bandwidth_independent_of_sample_rate(rng):
    z = complex_gaussian(rng, N)
    a = F.bandwidth_factor(sio.IQRecording(z, 1.0))
    b = F.bandwidth_factor(sio.IQRecording(z, 2.5e6))
    assert a == pytest.approx(b, rel=1e-12)


# --- energy concentration ----------------------------------------------------


def test_energy_concentration_tone():
    assert F.energy_concentration(np.exp(2j * np.pi * 0.25 * t)) > 0.99


def test_energy_concentration_flat_spectrum(rng):
    spec = np.exp(2j * np.pi * rng.random(N))
    z = np.fft.ifft(spec)
    assert F.energy_concentration(z) == pytest.approx(math.ceil(0.1 * N) / N, abs=1e-6)


def test_energy_concentration_noise(rng):
    vals = [F.energy_concentration(complex_gaussian(rng, 4096)) for _ in range(10)]
    assert all(0.1 < v < 0.5 for v in vals)
    # exponential bin powers: top decile carries (1 + ln 10) / 10 of the mass
    assert np.mean(vals) == pytest.approx((1 + math.log(10)) / 10, abs=0.02)


# --- fluctuation index ----------------------------------------------------------


def test_fluctuation_constant():
    assert F.fluctuation_index(np.exp(2j * np.pi * 0.1 * t)) == pytest.approx(0.0, abs=1e-12)
    assert F.fluctuation_index(np.tile([1, 1j, -1, -1j], 16)) == 0.0


def test_fluctuation_on_off():
    assert F.fluctuation_index(np.tile([0.0, 2.0], 64) + 0j) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_fluctuation_gaussian(seed):
    assert abs(F.fluctuation_index(complex_gaussian(np.random.default_rng(seed), 4096)) - 1.0) < 0.05


# --- fractal dimension ----------------------------------------------------------


def test_higuchi_ramp():
    assert F.fractal_dimension(t / N + 0j) == pytest.approx(1.0, abs=0.05)


def test_higuchi_constant():
    assert F.fractal_dimension(np.full(N, 1.0 + 0j)) == 1.0
    assert F.fractal_dimension(np.exp(2j * np.pi * 0.1 * t)) == 1.0


@pytest.mark.parametrize("seed", range(3))
def test_higuchi_white_noise(seed):
    x = np.random.default_rng(seed).standard_normal(N)
    assert F.fractal_dimension(x + 0j) == pytest.approx(2.0, abs=0.15)
    assert oracles.higuchi_reference(np.abs(x), 16) == pytest.approx(2.0, abs=0.15)


def test_higuchi_matches_reference(rng):
    walk = np.cumsum(rng.standard_normal(512))
    a = np.abs(walk)
    expected = min(max(oracles.higuchi_reference(a, 16), 1.0), 2.0)
    assert 1.0 < expected < 2.0
    assert F.fractal_dimension(walk + 0j) == pytest.approx(expected, rel=1e-10)


def test_higuchi_needs_enough_samples(rng):
    with pytest.raises(TooShort):
        F.fractal_dimension(complex_gaussian(rng, 100), k_max=16)


# --- Lempel-Ziv ------------------------------------------------------------------


def test_lz_reference_string():
    s = "0001101001000101"
    assert F.lz76_phrase_count(s) == 6
    assert oracles.lz76_naive(s) == 6
    assert oracles.lz76_kaspar_schuster(s) == 6


def test_lz_constant_envelope():
    assert F.lz76_phrase_count("0" * N) == 2
    assert F.lz_complexity(np.full(N, 1.0 + 0j)) == 2 * math.log2(N) / N


def test_lz_alternating():
    z = np.tile([0.1, 1.0], N // 2) + 0j
    assert F.lz76_phrase_count(F.binarize_median(np.abs(z))) == 3


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="01", min_size=1, max_size=80))
def test_lz_matches_oracles(s):
    assert F.lz76_phrase_count(s) == oracles.lz76_naive(s) == oracles.lz76_kaspar_schuster(s)


def test_lz_accepts_bit_arrays():
    bits = np.array([0, 0, 0, 1, 1, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 1], dtype=np.uint8)
    assert F.lz76_phrase_count(bits) == 6


# --- invariances -------------------------------------------------------------------


def _rec(seed, name="16QAM", snr=15.0):
    return sio.synthesize(sio.label_by_name(name), N, snr, seed).recording


@pytest.mark.parametrize("name", ["BPSK", "16QAM", "2FSK", "OOK", "AM-DSB", "FM"])
def test_scale_invariance(name):
    z = _rec(5, name).samples
    a = F.feature_vector(sio.normalize_power(z))
    b = F.feature_vector(sio.normalize_power(3.7 * z))
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("theta", [0.3, 1.0, np.pi / 2, 2.5])
def test_phase_invariance_of_magnitude_features(theta):
    z = _rec(9).samples
    a = F.feature_vector(z)
    b = F.feature_vector(np.exp(1j * theta) * z)
    magnitude_only = [j for j, name in enumerate(F.FEATURE_NAMES) if name != "bispectral_integration"]
    np.testing.assert_allclose(a[magnitude_only], b[magnitude_only], rtol=1e-9, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    sparsity=st.floats(0.0, 0.95),
    n=st.sampled_from([320, 512, 1024]),
)
def test_features_never_nan(seed, sparsity, n):
    r = np.random.default_rng(seed)
    z = complex_gaussian(r, n) * (r.random(n) >= sparsity)
    if not np.any(z):
        z[0] = 1.0
    v = F.feature_vector(sio.normalize_power(z))
    assert np.all(np.isfinite(v))
    assert 0 <= v[1] <= 1
    assert 0 < v[4] <= 1
    assert v[5] >= 0
    assert 1 <= v[6] <= 2
    assert v[7] > 0


# --- dataset ---------------------------------------------------------------------


def _labeled(seed, name, snr=20.0):
    return sio.synthesize(sio.label_by_name(name), N, snr, seed)


def test_extract_single_recording():
    ds = F.extract_all([_labeled(0, "QPSK")])
    assert ds.raw.shape == (1, 8)
    assert np.all(ds.std == 0)
    assert ds.constant_columns == list(range(8))
    np.testing.assert_array_equal(ds.features, np.zeros((1, 8)))


def test_extract_identical_recordings():
    lr = _labeled(0, "QPSK")
    ds = F.extract_all([lr, lr])
    np.testing.assert_array_equal(ds.raw[0], ds.raw[1])
    np.testing.assert_array_equal(ds.features, np.zeros((2, 8)))


def test_extract_standardization():
    recs = [_labeled(s, n) for s in range(6) for n in ("QPSK", "FM", "OOK")]
    ds = F.extract_all(recs)
    x = ds.features
    np.testing.assert_allclose(x.mean(axis=0), 0, atol=1e-9)
    np.testing.assert_allclose(x.std(axis=0), 1, atol=1e-9)
    assert ds.class_names == ["ASK", "FM", "PSK"]
    assert [ds.class_names[c] for c in ds.labels[:3]] == ["PSK", "FM", "ASK"]


def test_extract_kurtosis_separates_bpsk_and_16qam():
    recs = [_labeled(s, "BPSK") for s in range(100)] + [_labeled(1000 + s, "16QAM") for s in range(100)]
    ds = F.extract_all(recs)
    k = ds.raw[:, 0]
    a, b = k[ds.labels == ds.class_names.index("PSK")], k[ds.labels == ds.class_names.index("QAM")]
    pooled = math.sqrt((a.var(ddof=1) + b.var(ddof=1)) / 2)
    assert abs(a.mean() - b.mean()) > 2 * pooled


def test_extract_permutation_equivariance(rng):
    recs = [_labeled(s, n) for s in range(4) for n in ("BPSK", "FM", "64QAM")]
    ds = F.extract_all(recs)
    perm = rng.permutation(len(recs))
    dp = F.extract_all([recs[i] for i in perm])
    np.testing.assert_array_equal(dp.raw, ds.raw[perm])
    np.testing.assert_array_equal(dp.labels, ds.labels[perm])


def test_extract_parallel_matches_sequential():
    recs = [_labeled(s, n) for s in range(3) for n in ("QPSK", "AM-DSB")]
    seq = F.extract_all(recs)
    par = F.extract_all(recs, workers=2)
    np.testing.assert_array_equal(seq.raw, par.raw)


def test_extract_custom_grouping():
    recs = [_labeled(0, "BPSK"), _labeled(1, "16QAM"), _labeled(2, "FM")]
    ds = F.extract_all(recs, grouping={"BPSK": "digital", "16QAM": "digital", "FM": "analog"})
    assert ds.class_names == ["analog", "digital"]
    assert ds.labels.tolist() == [1, 1, 0]


def test_extract_tags_failing_sample():
    good = _labeled(0, "QPSK")
    short = sio.LabeledRecording(sio.IQRecording(np.exp(2j * np.pi * 0.1 * np.arange(100))), good.label, 0.0)
    with pytest.raises(FeatureError) as info:
        F.extract_all([good, short])
    assert info.value.index == 1
