"""IQ recordings: validation, power normalization, synthesis, storage and CV folds.

Dataset container
-----------------
A UTF-8 JSON manifest::

    {"version": 1,
     "entries": [{"file": "samples.bin", "offset_bytes": 0, "n_samples": 1024,
                  "sample_rate_hz": 1e6,
                  "label": {"name": "QPSK", "family": "PSK", "order": 4},
                  "snr_db": 10.0}, ...]}

``file`` is resolved relative to the manifest. Blobs hold little-endian float32
interleaved I,Q pairs, so a recording of N samples occupies exactly 8*N bytes.
"""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy import signal as sps

from .errors import (
    FormatError,
    TooFewSamples,
    UnsupportedModulation,
    ValidationError,
    ZeroSignal,
)

logger = logging.getLogger(__name__)

MIN_SAMPLES = 64
MANIFEST_VERSION = 1

# Synthetic waveform parameters
RRC_ROLLOFF = 0.35
SAMPLES_PER_SYMBOL = 8
RRC_SPAN_SYMBOLS = 8
TRANSIENT_SYMBOLS = RRC_SPAN_SYMBOLS // 2
FSK_MOD_INDEX = 1.0
AM_MOD_INDEX = 0.5
FM_DEVIATION = 0.05  # peak-ish frequency deviation, cycles/sample per unit-std message
MESSAGE_CUTOFF = 0.05  # analog message bandwidth, fraction of fs
DEFAULT_SAMPLE_RATE = 1e6

SUPPORTED_FAMILIES = ("PSK", "QAM", "FSK", "ASK", "AM", "FM")
ANALOG_FAMILIES = ("AM", "FM")


@dataclass(frozen=True)
class ModulationLabel:
    name: str
    family: str
    order: Optional[int] = None

    def __post_init__(self):
        if not self.family:
            raise ValidationError(f"label {self.name!r} has an empty family")
        if self.order is not None and self.order < 1:
            raise ValidationError(f"label {self.name!r} has non-positive order {self.order}")

    def to_dict(self) -> dict:
        return {"name": self.name, "family": self.family, "order": self.order}

    @classmethod
    def from_dict(cls, d: dict) -> "ModulationLabel":
        try:
            return cls(name=str(d["name"]), family=str(d["family"]), order=d.get("order"))
        except KeyError as exc:
            raise FormatError(f"label missing field {exc}") from None


STANDARD_LABELS = {
    lab.name: lab
    for lab in (
        ModulationLabel("BPSK", "PSK", 2),
        ModulationLabel("QPSK", "PSK", 4),
        ModulationLabel("8PSK", "PSK", 8),
        ModulationLabel("16QAM", "QAM", 16),
        ModulationLabel("64QAM", "QAM", 64),
        ModulationLabel("256QAM", "QAM", 256),
        ModulationLabel("2FSK", "FSK", 2),
        ModulationLabel("4FSK", "FSK", 4),
        ModulationLabel("OOK", "ASK", 2),
        ModulationLabel("4ASK", "ASK", 4),
        ModulationLabel("8ASK", "ASK", 8),
        ModulationLabel("AM-DSB", "AM", None),
        ModulationLabel("FM", "FM", None),
    )
}


def label_by_name(name: str) -> ModulationLabel:
    try:
        return STANDARD_LABELS[name]
    except KeyError:
        raise UnsupportedModulation(
            f"unknown label {name!r}; known: {', '.join(STANDARD_LABELS)}"
        ) from None


@dataclass
class IQRecording:
    """One complex baseband capture.

    ``samples`` is stored as complex128. ``metadata`` may carry generator
    details such as ``transient_samples`` (edge samples affected by the
    shaping filter).
    """

    samples: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1:
            raise ValidationError(f"samples must be 1-D, got shape {self.samples.shape}")
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        if len(self.samples) < MIN_SAMPLES:
            raise ValidationError(
                f"recording has {len(self.samples)} samples, need >= {MIN_SAMPLES}"
            )
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError("recording contains NaN or Inf samples")

    def __len__(self):
        return len(self.samples)

    @property
    def n(self) -> int:
        return len(self.samples)


@dataclass
class LabeledRecording:
    recording: IQRecording
    label: ModulationLabel
    snr_db: float

    def __post_init__(self):
        if not math.isfinite(self.snr_db):
            raise ValidationError(f"snr_db must be finite, got {self.snr_db}")


def mean_power(z) -> float:
    z = np.asarray(z)
    return float(np.mean(z.real**2 + z.imag**2))


def normalize_power(rec: Union[IQRecording, np.ndarray]):
    """Scale a signal to unit mean power, z / sqrt(mean |z|^2).

    Accepts an :class:`IQRecording` (returns a new recording) or a bare
    complex array (returns an array).
    """
    z = rec.samples if isinstance(rec, IQRecording) else np.asarray(rec, dtype=np.complex128)
    p = mean_power(z)
    if not p > np.finfo(np.float64).tiny:
        raise ZeroSignal(f"mean power {p!r} is zero")
    out = z / math.sqrt(p)
    if isinstance(rec, IQRecording):
        return IQRecording(out, rec.sample_rate, dict(rec.metadata))
    return out


# ---------------------------------------------------------------------------
# container format


def load_dataset(manifest_path) -> list[LabeledRecording]:
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read manifest {manifest_path}: {exc}") from exc
    if not isinstance(manifest, dict) or manifest.get("version") != MANIFEST_VERSION:
        raise FormatError(f"manifest {manifest_path} is not a version-1 manifest")
    entries = manifest.get("entries")
    if not isinstance(entries, list):
        raise FormatError("manifest has no 'entries' list")

    blob_sizes: dict[Path, int] = {}
    out = []
    for k, entry in enumerate(entries):
        try:
            path = manifest_path.parent / entry["file"]
            offset = int(entry["offset_bytes"])
            n = int(entry["n_samples"])
            fs = float(entry["sample_rate_hz"])
            label = ModulationLabel.from_dict(entry["label"])
            snr = float(entry["snr_db"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"entry {k}: malformed ({exc})") from None
        if path not in blob_sizes:
            try:
                blob_sizes[path] = path.stat().st_size
            except OSError as exc:
                raise FormatError(f"entry {k}: cannot stat {path}: {exc}") from None
            if blob_sizes[path] % 8:
                raise FormatError(
                    f"entry {k}: blob {path.name} holds {blob_sizes[path] / 4:g} floats; "
                    "I/Q interleaving needs an even count"
                )
        if offset < 0 or n < 0 or offset + 8 * n > blob_sizes[path]:
            raise FormatError(
                f"entry {k}: {n} samples at offset {offset} exceed blob size {blob_sizes[path]}"
            )
        raw = np.fromfile(path, dtype="<f4", count=2 * n, offset=offset)
        if raw.size != 2 * n:
            raise FormatError(f"entry {k}: short read from {path}")
        samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
        try:
            rec = IQRecording(samples, fs)
            out.append(LabeledRecording(rec, label, snr))
        except ValidationError as exc:
            raise ValidationError(f"entry {k}: {exc}") from None
    return out


def save_dataset(recs: Sequence[LabeledRecording], manifest_path, blob_name: str = "samples.bin"):
    """Write recordings as one blob plus manifest. Samples are stored as float32."""
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    with open(manifest_path.parent / blob_name, "wb") as fh:
        for lr in recs:
            z = lr.recording.samples
            buf = np.empty(2 * len(z), dtype="<f4")
            buf[0::2] = z.real
            buf[1::2] = z.imag
            fh.write(buf.tobytes())
            entries.append(
                {
                    "file": blob_name,
                    "offset_bytes": offset,
                    "n_samples": len(z),
                    "sample_rate_hz": lr.recording.sample_rate,
                    "label": lr.label.to_dict(),
                    "snr_db": lr.snr_db,
                }
            )
            offset += buf.nbytes
    manifest_path.write_text(
        json.dumps({"version": MANIFEST_VERSION, "entries": entries}, indent=1) + "\n",
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# synthesis


def rrc_taps(rolloff: float, sps_: int, span: int) -> np.ndarray:
    """Unit-energy root-raised-cosine impulse response, ``span*sps_ + 1`` taps."""
    t = np.arange(-span * sps_ // 2, span * sps_ // 2 + 1) / sps_
    b = rolloff
    h = np.empty_like(t)
    for i, ti in enumerate(t):
        if abs(ti) < 1e-12:
            h[i] = 1.0 - b + 4.0 * b / np.pi
        elif b > 0 and abs(abs(4.0 * b * ti) - 1.0) < 1e-12:
            h[i] = (b / np.sqrt(2.0)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * b)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b))
            )
        else:
            h[i] = (np.sin(np.pi * ti * (1 - b)) + 4 * b * ti * np.cos(np.pi * ti * (1 + b))) / (
                np.pi * ti * (1 - (4 * b * ti) ** 2)
            )
    return h / np.sqrt(np.sum(h**2))


def _constellation(label: ModulationLabel) -> np.ndarray:
    m = label.order or 2
    fam = label.family
    if fam == "PSK":
        return np.exp(2j * np.pi * np.arange(m) / m)
    if fam == "QAM":
        side = int(round(math.sqrt(m)))
        if side * side != m:
            raise UnsupportedModulation(f"only square QAM is supported, got order {m}")
        lv = 2.0 * np.arange(side) - (side - 1)
        pts = (lv[:, None] + 1j * lv[None, :]).ravel()
        return pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    if fam == "ASK":
        # unipolar levels; order 2 is on-off keying
        return np.arange(m) / (m - 1) + 0j
    raise UnsupportedModulation(f"{fam} has no constellation")


def _message(rng: np.random.Generator, n: int) -> np.ndarray:
    """Band-limited zero-mean unit-variance Gaussian message."""
    taps = sps.firwin(129, MESSAGE_CUTOFF * 2)
    w = rng.standard_normal(n + len(taps))
    m = np.convolve(w, taps, mode="valid")[:n]
    m = m - m.mean()
    return m / m.std()


def _clean_waveform(label: ModulationLabel, n: int, rng: np.random.Generator) -> np.ndarray:
    fam = label.family
    if fam in ("PSK", "QAM", "ASK"):
        pts = _constellation(label)
        nsym = -(-n // SAMPLES_PER_SYMBOL)
        sym = pts[rng.integers(0, len(pts), nsym)]
        up = np.zeros(nsym * SAMPLES_PER_SYMBOL, dtype=np.complex128)
        up[::SAMPLES_PER_SYMBOL] = sym
        h = rrc_taps(RRC_ROLLOFF, SAMPLES_PER_SYMBOL, RRC_SPAN_SYMBOLS)
        return np.convolve(up, h, mode="same")[:n]
    if fam == "FSK":
        m = label.order or 2
        nsym = -(-n // SAMPLES_PER_SYMBOL)
        tone = 2.0 * rng.integers(0, m, nsym) - (m - 1)
        freq = np.repeat(tone * FSK_MOD_INDEX / (2.0 * SAMPLES_PER_SYMBOL), SAMPLES_PER_SYMBOL)[:n]
        phase = 2 * np.pi * np.cumsum(freq) + rng.uniform(0, 2 * np.pi)
        return np.exp(1j * phase)
    if fam == "AM":
        msg = _message(rng, n)
        return (1.0 + AM_MOD_INDEX * msg / np.max(np.abs(msg))) + 0j
    if fam == "FM":
        msg = _message(rng, n)
        phase = 2 * np.pi * FM_DEVIATION * np.cumsum(msg) + rng.uniform(0, 2 * np.pi)
        return np.exp(1j * phase)
    raise UnsupportedModulation(
        f"family {fam!r} not in {', '.join(SUPPORTED_FAMILIES)}"
    )


def synthesize_components(label: ModulationLabel, n: int, snr_db: float, seed: int):
    """Return the clean waveform (unit mean power) and the additive noise, separately."""
    if label.family not in SUPPORTED_FAMILIES:
        raise UnsupportedModulation(
            f"family {label.family!r} not in {', '.join(SUPPORTED_FAMILIES)}"
        )
    if n < MIN_SAMPLES:
        raise ValidationError(f"n must be >= {MIN_SAMPLES}, got {n}")
    rng = np.random.default_rng(seed)
    clean = normalize_power(_clean_waveform(label, n, rng))
    noise_var = 10.0 ** (-snr_db / 10.0)
    noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(noise_var / 2)
    return clean, noise


def synthesize(
    label: ModulationLabel,
    n: int,
    snr_db: float,
    seed: int,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
) -> LabeledRecording:
    """Generate one power-normalized recording of ``label`` in white Gaussian noise.

    Digital families (PSK, QAM, ASK) use root-raised-cosine shaping with
    roll-off 0.35 at 8 samples/symbol; FSK is continuous-phase. SNR is the
    clean-signal power over the injected noise power, before normalization.
    """
    clean, noise = synthesize_components(label, n, snr_db, seed)
    meta = {"seed": int(seed)}
    if label.family not in ANALOG_FAMILIES:
        meta["samples_per_symbol"] = SAMPLES_PER_SYMBOL
        meta["transient_samples"] = TRANSIENT_SYMBOLS * SAMPLES_PER_SYMBOL
    rec = normalize_power(IQRecording(clean + noise, sample_rate, meta))
    return LabeledRecording(rec, label, float(snr_db))


def synthesize_dataset(
    labels: Sequence[ModulationLabel],
    per_label: int,
    snr_range: tuple[float, float],
    n: int,
    seed: int,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
) -> list[LabeledRecording]:
    """``per_label`` recordings for each label, SNR drawn uniformly from ``snr_range``."""
    rng = np.random.default_rng(seed)
    lo, hi = snr_range
    out = []
    for lab in labels:
        for _ in range(per_label):
            snr = float(rng.uniform(lo, hi))
            sub_seed = int(rng.integers(0, 2**63 - 1))
            out.append(synthesize(lab, n, snr, sub_seed, sample_rate))
    return out


# ---------------------------------------------------------------------------
# folds


@dataclass(frozen=True)
class FoldAssignment:
    fold_of: np.ndarray
    n_folds: int

    def test_indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == k)

    def train_indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != k)

    def splits(self):
        for k in range(self.n_folds):
            yield self.train_indices(k), self.test_indices(k)


def assign_folds(n_samples: int, labels, f: int, seed: int) -> FoldAssignment:
    """Stratified fold assignment.

    Each class is shuffled and dealt round-robin, continuing the deal across
    classes, so both overall and per-class fold sizes differ by at most one.
    """
    labels = np.asarray(labels)
    if f < 2:
        raise ValueError(f"need at least 2 folds, got {f}")
    if len(labels) != n_samples:
        raise ValueError(f"{len(labels)} labels for {n_samples} samples")
    if n_samples < f:
        raise TooFewSamples(f"{n_samples} samples cannot fill {f} folds")
    classes, counts = np.unique(labels, return_counts=True)
    short = classes[counts < f]
    if len(short):
        raise TooFewSamples(
            f"classes {short.tolist()} have fewer than {f} members"
        )
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n_samples, dtype=np.int64)
    pos = 0
    for c in classes:
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        fold_of[idx] = (pos + np.arange(len(idx))) % f
        pos += len(idx)
    return FoldAssignment(fold_of, f)
