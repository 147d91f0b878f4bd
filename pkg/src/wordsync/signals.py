"""Epoch-shaped multichannel signal data: container, file bundle, synthesis.

An epoch set is a dense (epochs x channels x timepoints) float64 array plus
per-epoch metadata columns (subject, token, content flag, predictor values),
channel names, and a channel adjacency list.  Storage is a two-file bundle:
a versioned binary .dat (magic, version, JSON header with dimensions and
channel layout, then raw float64) and a .tsv with one metadata row per epoch,
so round-trips are bit-exact and external tools can generate bundles easily.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"WSEPOCH\x00"
FORMAT_VERSION = 1

# Scalp rows from front to back; grids pick an evenly spaced subset.
_ROW_LABELS = ("F", "FC", "C", "CP", "P", "PO", "O")

ROI_PRESETS = {
    "ANT": (("F", "FC"), (0.200, 0.400)),
    "N400": (("C", "CP", "P"), (0.300, 0.500)),
    "P600": (("P", "PO", "O"), (0.600, 0.700)),
}


class EpochSetError(ValueError):
    pass


@dataclass
class EpochSet:
    data: np.ndarray  # (epochs, channels, timepoints)
    sample_rate: float
    window: tuple  # (start, end) seconds relative to word onset
    channel_names: list
    adjacency: list  # symmetric channel-index pairs, stored once as (a, b), a < b
    metadata: dict  # column name -> ndarray (numeric) or list[str]

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise EpochSetError(f"data must be 3-dimensional, got shape {self.data.shape}")
        n_epochs, n_channels, n_times = self.data.shape
        if len(self.channel_names) != n_channels:
            raise EpochSetError(f"{len(self.channel_names)} channel names for "
                                f"{n_channels} channels")
        pairs = set()
        for a, b in self.adjacency:
            if not (0 <= a < n_channels and 0 <= b < n_channels) or a == b:
                raise EpochSetError(f"bad adjacency pair ({a}, {b})")
            pairs.add((min(a, b), max(a, b)))
        self.adjacency = sorted(pairs)
        for name, column in self.metadata.items():
            if len(column) != n_epochs:
                raise EpochSetError(f"metadata column {name!r} has {len(column)} "
                                    f"rows for {n_epochs} epochs")
        t0, t1 = self.window
        expected = int(round((t1 - t0) * self.sample_rate))
        if abs(expected - n_times) > 1:
            raise EpochSetError(f"window {self.window} at {self.sample_rate} Hz "
                                f"does not cover {n_times} timepoints")

    @property
    def n_epochs(self):
        return self.data.shape[0]

    @property
    def n_channels(self):
        return self.data.shape[1]

    @property
    def n_timepoints(self):
        return self.data.shape[2]

    @property
    def times(self):
        return self.window[0] + np.arange(self.n_timepoints) / self.sample_rate

    def channel_index(self, name):
        try:
            return self.channel_names.index(name)
        except ValueError:
            raise EpochSetError(f"unknown channel {name!r}") from None

    def time_indices(self, start, end):
        times = self.times
        idx = np.nonzero((times >= start - 1e-9) & (times <= end + 1e-9))[0]
        if idx.size == 0:
            raise EpochSetError(f"window ({start}, {end}) contains no samples")
        return idx


def _row_label(channel_name):
    return "".join(ch for ch in channel_name if ch.isalpha())


def grid_channels(n_channels, n_cols=8):
    """Channel names and 4-neighbor adjacency for a front-to-back grid.

    Rows take evenly spaced labels from the canonical front-to-back sequence
    so region presets apply to any grid size up to 7 rows.
    """
    n_rows = -(-n_channels // n_cols)
    if n_rows > len(_ROW_LABELS):
        raise EpochSetError(f"{n_channels} channels at {n_cols} per row needs "
                            f"{n_rows} rows; at most {len(_ROW_LABELS)} supported")
    picks = np.round(np.linspace(0, len(_ROW_LABELS) - 1, n_rows)).astype(int)
    labels = [_ROW_LABELS[i] for i in picks]
    names = []
    for r in range(n_rows):
        for c in range(n_cols):
            if len(names) < n_channels:
                names.append(f"{labels[r]}{c + 1}")
    adjacency = []
    for i in range(n_channels):
        r, c = divmod(i, n_cols)
        if c + 1 < n_cols and i + 1 < n_channels and (i + 1) // n_cols == r:
            adjacency.append((i, i + 1))
        if i + n_cols < n_channels:
            adjacency.append((i, i + n_cols))
    return names, adjacency


def preset_region(epochs: EpochSet, name):
    """(channel indices, time window) for a named region of interest."""
    if name not in ROI_PRESETS:
        raise EpochSetError(f"unknown region preset {name!r} "
                            f"(have {sorted(ROI_PRESETS)})")
    rows, window = ROI_PRESETS[name]
    idx = [i for i, ch in enumerate(epochs.channel_names) if _row_label(ch) in rows]
    if not idx:
        raise EpochSetError(f"region {name!r} matches no channels in this montage")
    return idx, window


# --- file bundle -------------------------------------------------------------

def save_epochs(epochs: EpochSet, base_path):
    base = str(base_path)
    header = {
        "n_epochs": epochs.n_epochs,
        "n_channels": epochs.n_channels,
        "n_timepoints": epochs.n_timepoints,
        "sample_rate": epochs.sample_rate,
        "window": list(epochs.window),
        "channel_names": list(epochs.channel_names),
        "adjacency": [list(p) for p in epochs.adjacency],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(base + ".dat", "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(epochs.data).tobytes())
    columns = list(epochs.metadata)
    with open(base + ".tsv", "w", encoding="utf-8") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in range(epochs.n_epochs):
            cells = []
            for col in columns:
                v = epochs.metadata[col][row]
                cells.append(repr(float(v)) if isinstance(v, (int, float, np.floating))
                             and not isinstance(v, bool) else str(v))
            fh.write("\t".join(cells) + "\n")


def load_epochs(base_path) -> EpochSet:
    base = str(base_path)
    with open(base + ".dat", "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise EpochSetError(f"{base}.dat: bad magic; not an epoch bundle")
        version, blob_len = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise EpochSetError(f"{base}.dat: unsupported format version {version} "
                                f"(reader supports {FORMAT_VERSION})")
        header = json.loads(fh.read(blob_len).decode())
        shape = (header["n_epochs"], header["n_channels"], header["n_timepoints"])
        payload = fh.read()
    expected = shape[0] * shape[1] * shape[2] * 8
    if len(payload) != expected:
        raise EpochSetError(f"{base}.dat: payload is {len(payload)} bytes, "
                            f"expected {expected}")
    data = np.frombuffer(payload, dtype=np.float64).reshape(shape).copy()
    metadata = {}
    with open(base + ".tsv", encoding="utf-8") as fh:
        columns = fh.readline().rstrip("\n").split("\t")
        raw = {c: [] for c in columns}
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != len(columns):
                raise EpochSetError(f"{base}.tsv:{lineno}: expected "
                                    f"{len(columns)} fields, got {len(parts)}")
            for c, v in zip(columns, parts):
                raw[c].append(v)
    for c, vals in raw.items():
        try:
            metadata[c] = np.array([float(v) for v in vals], dtype=np.float64)
        except ValueError:
            metadata[c] = list(vals)
    return EpochSet(data, header["sample_rate"], tuple(header["window"]),
                    header["channel_names"], [tuple(p) for p in header["adjacency"]],
                    metadata)


# --- synthesis ---------------------------------------------------------------

@dataclass
class SynthSpec:
    """Parameters of a synthetic epoch set with an optional injected effect.

    The effect multiplies the target predictor into a binary spatiotemporal
    template (the given channel rows within the given time window).
    """

    n_subjects: int = 20
    epochs_per_subject: int = 100
    n_channels: int = 61
    n_cols: int = 9
    sample_rate: float = 500.0
    window: tuple = (-0.3, 1.0)
    noise_sd: float = 1.0
    target_name: str = "target"
    effect_amplitude: float = 0.0
    effect_rows: tuple = ("P", "PO")
    effect_window: tuple = (0.6, 0.7)
    control_names: tuple = ("sent_order", "word_pos", "log_freq",
                            "prev_freq", "next_freq", "sound_power")


def synth_epochs(spec: SynthSpec, seed=0) -> EpochSet:
    """Gaussian-noise epochs with a known injected predictor effect."""
    rng = np.random.default_rng(seed)
    names, adjacency = grid_channels(spec.n_channels, spec.n_cols)
    n_epochs = spec.n_subjects * spec.epochs_per_subject
    t0, t1 = spec.window
    n_times = int(round((t1 - t0) * spec.sample_rate))
    data = rng.normal(0.0, spec.noise_sd, size=(n_epochs, spec.n_channels, n_times))
    target = rng.normal(0.0, 1.0, size=n_epochs)
    metadata = {
        "subject": [f"S{e // spec.epochs_per_subject:02d}" for e in range(n_epochs)],
        "token": [f"w{e}" for e in range(n_epochs)],
        "content": np.ones(n_epochs),
        spec.target_name: target,
    }
    for name in spec.control_names:
        metadata[name] = rng.normal(0.0, 1.0, size=n_epochs)
    if spec.effect_amplitude != 0.0:
        ch_idx = np.array([i for i, ch in enumerate(names)
                           if _row_label(ch) in spec.effect_rows], dtype=np.intp)
        times = t0 + np.arange(n_times) / spec.sample_rate
        tp_idx = np.nonzero((times >= spec.effect_window[0] - 1e-9)
                            & (times <= spec.effect_window[1] + 1e-9))[0]
        if ch_idx.size == 0 or tp_idx.size == 0:
            raise EpochSetError("injected effect site is empty")
        bump = spec.effect_amplitude * target
        data[np.ix_(np.arange(n_epochs), ch_idx, tp_idx)] += bump[:, None, None]
    return EpochSet(data, spec.sample_rate, spec.window, names, adjacency, metadata)


def effect_site(spec: SynthSpec, epochs: EpochSet):
    """(channel, timepoint) cells covered by the spec's injected template."""
    ch_idx = [i for i, ch in enumerate(epochs.channel_names)
              if _row_label(ch) in spec.effect_rows]
    tp_idx = epochs.time_indices(*spec.effect_window)
    return {(c, int(t)) for c in ch_idx for t in tp_idx}
