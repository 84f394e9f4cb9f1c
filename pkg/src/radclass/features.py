"""The eight per-recording features and the standardized feature dataset.

Feature order is fixed (1-based indices in parentheses):

    (1) temporal_kurtosis          (5) energy_concentration
    (2) singular_spectrum_entropy  (6) fluctuation_index
    (3) bispectral_integration     (7) fractal_dimension
    (4) bandwidth_factor           (8) lz_complexity

Every envelope-based feature works on a(n) = |z(n)|. All features except the
bispectrum depend on z only through |z| or |FFT(z)|.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import hankel, svdvals

from .errors import FeatureError, TooShort, ZeroSignal
from .signal_io import IQRecording, LabeledRecording

FEATURE_NAMES = (
    "temporal_kurtosis",
    "singular_spectrum_entropy",
    "bispectral_integration",
    "bandwidth_factor",
    "energy_concentration",
    "fluctuation_index",
    "fractal_dimension",
    "lz_complexity",
)
# column names used in features.csv
CSV_COLUMNS = (
    "kurtosis",
    "ss_entropy",
    "bispec",
    "bw_factor",
    "energy_conc",
    "fluct_idx",
    "fractal_dim",
    "lz",
)
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class FeatureConfig:
    embed_dim: Optional[int] = None  # None -> min(64, N // 4)
    fft_size: int = 128
    n_segments: Optional[int] = None  # None -> every half-overlapping segment
    k_max: int = 16

    def to_dict(self) -> dict:
        return asdict(self)


def _z(rec) -> np.ndarray:
    if isinstance(rec, IQRecording):
        return rec.samples
    return np.asarray(rec, dtype=np.complex128)


def _power_spectrum(z: np.ndarray) -> np.ndarray:
    X = np.fft.fft(z)
    P = X.real**2 + X.imag**2
    if not P.sum() > 0:
        raise ZeroSignal("power spectrum is identically zero")
    return P


def temporal_kurtosis(rec) -> float:
    """Non-central amplitude kurtosis mean(a^4) / mean(a^2)^2."""
    a2 = np.abs(_z(rec)) ** 2
    m2 = a2.mean()
    if not m2 > 0:
        raise ZeroSignal("mean squared amplitude is zero")
    return float(np.mean(a2**2) / m2**2)


def singular_spectrum_entropy(rec, embed_dim: Optional[int] = None) -> float:
    """Normalized Shannon entropy of the singular spectrum of the envelope's
    L x (N-L+1) trajectory (Hankel) matrix, in [0, 1].

    Singular values below the usual numerical-rank tolerance are treated as
    zero so that exactly low-rank envelopes give exact entropies.
    """
    a = np.abs(_z(rec))
    n = len(a)
    L = min(64, n // 4) if embed_dim is None else int(embed_dim)
    if not 2 <= L <= n // 2:
        raise ValueError(f"embed_dim must satisfy 2 <= L <= N/2 (N={n}), got {L}")
    traj = hankel(a[:L], a[L - 1 :])
    s = svdvals(traj)
    if not s[0] > 0:
        raise ZeroSignal("trajectory matrix is zero")
    s = s[s > s[0] * max(traj.shape) * np.finfo(np.float64).eps]
    p = s / s.sum()
    h = float(-np.sum(p * np.log(p)) / math.log(L))
    if h <= 0.0:
        return 0.0
    return min(h, 1.0)


def segment_spectra(z: np.ndarray, fft_size: int = 128, n_segments: Optional[int] = None):
    """FFTs of Hann-windowed, half-overlapping segments, shape (segments, fft_size)."""
    if fft_size < 4 or fft_size & (fft_size - 1):
        raise ValueError(f"fft_size must be a power of two, got {fft_size}")
    hop = fft_size // 2
    available = (len(z) - fft_size) // hop + 1 if len(z) >= fft_size else 0
    count = available if n_segments is None else min(int(n_segments), available)
    if count < 4:
        raise TooShort(
            f"{len(z)} samples give {available} segments of {fft_size}; need >= 4"
        )
    idx = np.arange(fft_size)[None, :] + hop * np.arange(count)[:, None]
    return np.fft.fft(z[idx] * np.hanning(fft_size), axis=1)


def principal_region(fft_size: int):
    """Bin index pairs (f1, f2) with 0 <= f2 <= f1 and f1 + f2 < fft_size / 2."""
    f1, f2 = np.meshgrid(np.arange(fft_size // 2), np.arange(fft_size // 2), indexing="ij")
    keep = (f2 <= f1) & (f1 + f2 < fft_size // 2)
    return f1[keep], f2[keep]


def bispectrum(rec, fft_size: int = 128, n_segments: Optional[int] = None) -> np.ndarray:
    """Segment-averaged direct bispectrum X(f1) X(f2) X*(f1+f2) over the principal region."""
    X = segment_spectra(_z(rec), fft_size, n_segments)
    f1, f2 = principal_region(fft_size)
    return np.mean(X[:, f1] * X[:, f2] * np.conj(X[:, f1 + f2]), axis=0)


def bispectral_integration(rec, fft_size: int = 128, n_segments: Optional[int] = None) -> float:
    """log(1 + sum |B(f1, f2)|) over the principal region."""
    return float(np.log1p(np.sum(np.abs(bispectrum(rec, fft_size, n_segments)))))


def bandwidth_factor(rec, sample_rate: Optional[float] = None) -> float:
    """RMS bandwidth about the absolute-frequency centroid, divided by that centroid.

    On complex baseband the signed centroid sits near zero for symmetric
    spectra, so |f| is used.
    """
    z = _z(rec)
    fs = sample_rate or (rec.sample_rate if isinstance(rec, IQRecording) else 1.0)
    P = _power_spectrum(z)
    af = np.abs(np.fft.fftfreq(len(z), d=1.0 / fs))
    w = P / P.sum()
    fc = float(np.sum(af * w))
    be = math.sqrt(float(np.sum((af - fc) ** 2 * w)))
    return be / max(fc, 1e-6 * fs)


def energy_concentration(rec) -> float:
    """Share of spectral energy held by the strongest ceil(10%) of FFT bins."""
    P = _power_spectrum(_z(rec))
    top = math.ceil(0.1 * len(P))
    return float(np.sort(P)[::-1][:top].sum() / P.sum())


def fluctuation_index(rec) -> float:
    """Coefficient of variation of instantaneous power |z|^2."""
    p = np.abs(_z(rec)) ** 2
    m = p.mean()
    if not m > 0:
        raise ZeroSignal("mean power is zero")
    return float(p.std() / m)


def higuchi_lengths(x: np.ndarray, k_max: int) -> np.ndarray:
    """Mean normalized curve length L(k), k = 1..k_max (Higuchi 1988)."""
    n = len(x)
    out = np.empty(k_max)
    for k in range(1, k_max + 1):
        lm = np.empty(k)
        for m in range(k):
            seg = x[m::k]
            n_int = len(seg) - 1
            # (N - 1) / (n_int * k) rescales the partial curve to full length
            lm[m] = np.abs(np.diff(seg)).sum() * (n - 1) / (n_int * k) / k
        out[k - 1] = lm.mean()
    return out


def fractal_dimension(rec, k_max: int = 16) -> float:
    """Higuchi fractal dimension of the envelope, clamped to [1, 2].

    A constant envelope (up to rounding) is a line and gives 1.0. Scales k
    with zero curve length are dropped from the log-log fit; with fewer than
    two usable scales the result is also 1.0.
    """
    a = np.abs(_z(rec))
    if k_max < 2:
        raise ValueError(f"k_max must be >= 2, got {k_max}")
    if len(a) < 8 * k_max:
        raise TooShort(f"Higuchi with k_max={k_max} needs >= {8 * k_max} samples")
    if np.ptp(a) <= 1e-12 * np.max(a):
        return 1.0
    L = higuchi_lengths(a, k_max)
    k = np.arange(1, k_max + 1)
    ok = L > 0
    if ok.sum() < 2:
        return 1.0
    slope = np.polyfit(np.log(k[ok]), np.log(L[ok]), 1)[0]
    return float(min(max(-slope, 1.0), 2.0))


def lz76_phrase_count(bits) -> int:
    """Number of phrases in the Lempel-Ziv (1976) exhaustive-history parse.

    Each phrase is the shortest extension of the remaining input that cannot
    be copied from the text preceding its last symbol (copies may overlap).
    A trailing copyable remainder counts as one final phrase.
    """
    if isinstance(bits, str):
        s = bits.encode()
    elif isinstance(bits, (bytes, bytearray)):
        s = bytes(bits)
    else:
        s = np.asarray(bits, dtype=np.uint8).tobytes()
    n = len(s)
    c = j = 0
    while j < n:
        l = 1
        while j + l <= n and s.find(s[j : j + l], 0, j + l - 1) != -1:
            l += 1
        c += 1
        j += l
    return c


def binarize_median(a: np.ndarray) -> np.ndarray:
    return (a > np.median(a)).astype(np.uint8)


def lz_complexity(rec) -> float:
    """Normalized LZ76 complexity c * log2(N) / N of the median-binarized envelope."""
    a = np.abs(_z(rec))
    n = len(a)
    c = lz76_phrase_count(binarize_median(a))
    return c * math.log2(n) / n


def feature_vector(rec, config: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """All eight features of one recording, in the fixed order."""
    funcs: list[tuple[str, Callable[[], float]]] = [
        ("temporal_kurtosis", lambda: temporal_kurtosis(rec)),
        ("singular_spectrum_entropy", lambda: singular_spectrum_entropy(rec, config.embed_dim)),
        ("bispectral_integration", lambda: bispectral_integration(rec, config.fft_size, config.n_segments)),
        ("bandwidth_factor", lambda: bandwidth_factor(rec)),
        ("energy_concentration", lambda: energy_concentration(rec)),
        ("fluctuation_index", lambda: fluctuation_index(rec)),
        ("fractal_dimension", lambda: fractal_dimension(rec, config.k_max)),
        ("lz_complexity", lambda: lz_complexity(rec)),
    ]
    out = np.empty(N_FEATURES)
    for j, (name, fn) in enumerate(funcs):
        try:
            v = fn()
        except Exception as exc:
            exc.feature = name
            raise
        if not math.isfinite(v):
            raise FloatingPointError(f"{name} produced {v}")
        out[j] = v
    return out


# ---------------------------------------------------------------------------
# dataset


def default_grouping(labels) -> dict[str, str]:
    """Same modulation type, any order -> one initial category (the family)."""
    return {lab.name: lab.family for lab in labels}


@dataclass
class LabeledDataset:
    """Feature matrix plus class ids.

    ``raw`` holds unscaled feature values; ``features`` the z-scored matrix
    computed with the recorded ``mean`` / ``std`` (std 0 marks a constant
    column, which standardizes to 0).
    """

    raw: np.ndarray
    labels: np.ndarray
    class_names: list[str]
    mean: np.ndarray = field(default=None)
    std: np.ndarray = field(default=None)
    label_names: list[str] = field(default_factory=list)
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.raw.ndim != 2 or len(self.raw) != len(self.labels):
            raise ValueError(
                f"feature matrix {self.raw.shape} does not match {len(self.labels)} labels"
            )
        if self.mean is None or self.std is None:
            self.mean, self.std = standardization(self.raw)

    @property
    def features(self) -> np.ndarray:
        return apply_standardization(self.raw, self.mean, self.std)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def constant_columns(self) -> list[int]:
        return np.flatnonzero(self.std == 0).tolist()

    def __len__(self):
        return len(self.labels)


def standardization(raw: np.ndarray):
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    # columns whose spread is pure rounding noise count as constant
    scale = np.maximum(np.abs(mean), 1.0)
    std = np.where(std <= 1e-12 * scale, 0.0, std)
    return mean, std


def apply_standardization(raw: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    safe = np.where(std > 0, std, 1.0)
    return np.where(std > 0, (raw - mean) / safe, 0.0)


def _row(args):
    rec, config = args
    return feature_vector(rec, config)


def extract_all(
    recs: Sequence[LabeledRecording],
    config: FeatureConfig = FeatureConfig(),
    grouping: Optional[dict[str, str]] = None,
    workers: int = 1,
) -> LabeledDataset:
    """Feature matrix for ``recs`` with labels mapped through ``grouping``.

    ``grouping`` maps label name -> category; it defaults to the modulation
    family. Class ids follow the sorted category names. Rows may be computed
    in parallel; standardization happens after every row exists, so the
    result does not depend on ``workers``.
    """
    if grouping is None:
        grouping = default_grouping(lr.label for lr in recs)
    try:
        cats = [grouping[lr.label.name] for lr in recs]
    except KeyError as exc:
        raise ValueError(f"grouping has no category for label {exc}") from None
    class_names = sorted(set(cats))
    ids = {c: i for i, c in enumerate(class_names)}

    rows = []
    if workers > 1 and len(recs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, (lr, fut) in enumerate(
                zip(recs, [pool.submit(_row, (lr.recording, config)) for lr in recs])
            ):
                try:
                    rows.append(fut.result())
                except Exception as exc:
                    raise FeatureError(i, getattr(exc, "feature", "?"), exc) from exc
    else:
        for i, lr in enumerate(recs):
            try:
                rows.append(feature_vector(lr.recording, config))
            except Exception as exc:
                raise FeatureError(i, getattr(exc, "feature", "?"), exc) from exc
    raw = np.vstack(rows) if rows else np.empty((0, N_FEATURES))
    return LabeledDataset(
        raw=raw,
        labels=np.array([ids[c] for c in cats], dtype=np.int64),
        class_names=class_names,
        label_names=[lr.label.name for lr in recs],
        feature_config=config,
    )
