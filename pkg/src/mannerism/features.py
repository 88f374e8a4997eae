"""Per-pattern multimodal features.

Five families are computed over the occurrence windows of a pattern:

========== ===== ==============================================================
family     count contents
========== ===== ==============================================================
disfluency   9   avg duration, count and proportion of words/fillers/pauses
prosody     26   mean/min/max/range/std of loudness, pitch, F1-F3; voiced ratio
body        40   per tracked joint: mean distance, speed mean/std, accel mean/std
face        24   mean/std of 9 normalized facial distances and of head pose
lexical     23   word counts per lexicon category
========== ===== ==============================================================

Windows are ``(start_s, end_s)`` pairs, half-open.  Samples selected by
several windows are pooled as a multiset: two identical windows leave every
mean/std/ratio unchanged and double the count columns.  Standard deviations
are population (ddof=0).  Degenerate cases (no samples, zero denominators)
produce 0.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from ._io import atomic_write_json, atomic_write_text, fmt_float
from .errors import DataError
from .signal import JointLayout

CATEGORIES = ("disfluency", "prosody", "body", "face", "lexical")
CATEGORY_COUNTS = {"disfluency": 9, "prosody": 26, "body": 40, "face": 24, "lexical": 23}
STATS = ("mean", "min", "max", "range", "std")
PROSODY_SIGNALS = ("loudness", "pitch", "f1", "f2", "f3")
FACE_DISTANCES = (
    "obh_left", "obh_right", "ibh_left", "ibh_right",
    "olh_left", "olh_right", "ilh_left", "ilh_right", "lip_cdt",
)

# 66-point landmark scheme: 17-21/22-26 brows, 36-41/42-47 eyes, 48-59 outer lip.
# Each entry is a pair of landmark groups; a group's centroid is the endpoint.
DEFAULT_FACE_MAP = {
    "obh_left": [[26], [45]],
    "obh_right": [[17], [36]],
    "ibh_left": [[22], [42]],
    "ibh_right": [[21], [39]],
    "olh_left": [[44], [46]],
    "olh_right": [[37], [41]],
    "ilh_left": [[43], [47]],
    "ilh_right": [[38], [40]],
    "lip_cdt": [[48], [54]],
    "inter_eye": [[36, 37, 38, 39, 40, 41], [42, 43, 44, 45, 46, 47]],
}


def disfluency_names():
    kinds = ("word", "filler", "pause")
    return (
        [f"disfl_avg_{k}_s" for k in kinds]
        + [f"disfl_n_{k}" for k in kinds]
        + [f"disfl_prop_{k}" for k in kinds]
    )


def prosody_names():
    return [f"pros_{s}_{st}" for s in PROSODY_SIGNALS for st in STATS] + ["pros_voiced_ratio"]


def body_names(layout):
    out = []
    for j in layout.tracked_joints:
        name = layout.joint_names[j]
        out += [f"body_{name}_{k}" for k in ("pos_mean", "speed_mean", "speed_std", "acc_mean", "acc_std")]
    return out


def face_names():
    return [f"face_{d}_{s}" for d in FACE_DISTANCES for s in ("mean", "std")] + [
        f"face_{a}_{s}" for a in ("pitch", "yaw", "roll") for s in ("mean", "std")
    ]


def lexical_names(lexicon):
    return [f"lex_{c}" for c in lexicon.names]


def count_columns(names):
    """Columns that add up (rather than stay fixed) when samples are duplicated."""
    return [n for n in names if n.startswith(("disfl_n_", "lex_"))]


# --- window helpers -----------------------------------------------------------

def _in_window(t, window):
    start, end = window
    return (t >= start) & (t < end)


def _pooled_index(t, windows):
    """Indices of ``t`` inside each window, concatenated (a multiset)."""
    t = np.asarray(t, float)
    parts = [np.flatnonzero(_in_window(t, w)) for w in windows]
    return np.concatenate(parts) if parts else np.zeros(0, int)


def _spread(x):
    # a constant sample has zero spread exactly, not np.std's rounding residue
    return float(np.std(x)) if np.ptp(x) > 0 else 0.0


def _stats(x):
    if len(x) == 0:
        return [0.0] * 5
    lo, hi = float(np.min(x)), float(np.max(x))
    return [float(np.mean(x)), lo, hi, hi - lo, _spread(x)]


def _mean_std(x):
    if len(x) == 0:
        return [0.0, 0.0]
    return [float(np.mean(x)), _spread(x)]


# --- families -------------------------------------------------------------------

def disfluency_features(transcript, windows):
    mids = np.array([t.mid_s for t in transcript.tokens])
    sel = [transcript.tokens[i] for i in _pooled_index(mids, windows)]
    total = len(sel)
    avgs, counts = [], []
    for kind in ("word", "filler", "pause"):
        durs = [t.duration_s for t in sel if t.kind == kind]
        counts.append(float(len(durs)))
        avgs.append(float(np.mean(durs)) if durs else 0.0)
    props = [c / total if total else 0.0 for c in counts]
    return np.array(avgs + counts + props)


def prosody_features(track, windows):
    idx = _pooled_index(track.t_s, windows)
    voiced = track.voiced[idx]
    out = _stats(track.loudness[idx])
    out += _stats(track.pitch_hz[idx][voiced])
    for k in range(3):
        out += _stats(track.formants_hz[idx, k][voiced])
    n_voiced = int(np.sum(voiced))
    out.append(n_voiced / max(1, len(idx) - n_voiced))
    return np.array(out)


def body_features(signal, layout, windows):
    if len(layout.tracked_joints) != 8:
        raise DataError(f"body features need 8 tracked joints, layout has {len(layout.tracked_joints)}")
    if signal.n_channels < 3 * len(layout.joint_names):
        raise DataError(f"signal has {signal.n_channels} channels, layout needs {3 * len(layout.joint_names)}")
    x = signal.samples
    rate = signal.sample_rate_hz
    t = signal.times
    ref = x[:, layout.channels(layout.reference_joint)]
    spans = [np.flatnonzero(_in_window(t, w)) for w in windows]
    out = []
    for j in layout.tracked_joints:
        rel = x[:, layout.channels(j)] - ref
        dist, speed, acc = [], [], []
        for idx in spans:
            p = rel[idx]
            dist.append(np.linalg.norm(p, axis=1))
            if len(idx) >= 3:
                v = np.gradient(p, axis=0) * rate
                a = np.gradient(v, axis=0) * rate
                speed.append(np.linalg.norm(v, axis=1))
                acc.append(np.linalg.norm(a, axis=1))
        dist = np.concatenate(dist) if dist else np.zeros(0)
        out.append(float(np.mean(dist)) if len(dist) else 0.0)
        out += _mean_std(np.concatenate(speed) if speed else np.zeros(0))
        out += _mean_std(np.concatenate(acc) if acc else np.zeros(0))
    return np.array(out)


def _group_point(landmarks, group):
    return landmarks[:, group, :].mean(axis=1)


def face_features(track, windows, face_map=None):
    fm = DEFAULT_FACE_MAP if face_map is None else face_map
    missing = [k for k in (*FACE_DISTANCES, "inter_eye") if k not in fm]
    if missing:
        raise DataError(f"face_map lacks {missing}")
    idx = _pooled_index(track.t_s, windows)
    lm = track.landmarks[idx]

    def dist(key):
        a, b = fm[key]
        return np.linalg.norm(_group_point(lm, a) - _group_point(lm, b), axis=1)

    eye = dist("inter_eye")
    ok = eye > 0
    out = []
    for key in FACE_DISTANCES:
        out += _mean_std(dist(key)[ok] / eye[ok])
    pose = track.pose[idx][ok]
    for k in range(3):
        out += _mean_std(pose[:, k])
    return np.array(out)


def lexical_features(transcript, lexicon, windows):
    words = [t for t in transcript.tokens if t.kind == "word"]
    mids = np.array([t.mid_s for t in words])
    sel = [words[i].text for i in _pooled_index(mids, windows)]
    return np.array([float(sum(lexicon.matches(w, c) for w in sel)) for c in lexicon.names])


# --- rows and matrices ---------------------------------------------------------

@dataclass(frozen=True)
class VideoTracks:
    """Every input track for one video."""

    video_id: str
    signal: object
    transcript: object
    prosody: object
    face: object


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    names: tuple
    categories: tuple

    def category_counts(self):
        return {c: self.categories.count(c) for c in CATEGORIES}


def feature_manifest(layout, lexicon):
    names, cats = [], []
    for cat, ns in (
        ("disfluency", disfluency_names()),
        ("prosody", prosody_names()),
        ("body", body_names(layout)),
        ("face", face_names()),
        ("lexical", lexical_names(lexicon)),
    ):
        names += ns
        cats += [cat] * len(ns)
    return tuple(names), tuple(cats)


def assemble_pattern_row(tracks, windows, lexicon, layout=None, face_map=None):
    """One feature row for a pattern, pooling all its occurrence windows."""
    if not windows:
        raise DataError("a pattern row needs at least one occurrence window")
    layout = layout or JointLayout()
    values = np.concatenate([
        disfluency_features(tracks.transcript, windows),
        prosody_features(tracks.prosody, windows),
        body_features(tracks.signal, layout, windows),
        face_features(tracks.face, windows, face_map),
        lexical_features(tracks.transcript, lexicon, windows),
    ])
    names, cats = feature_manifest(layout, lexicon)
    return FeatureVector(values, names, cats)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray  # rows x features
    names: tuple
    categories: tuple
    keys: tuple  # (video_id, pattern_id) per row

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(len(self.keys), len(self.names))
        if len(self.categories) != len(self.names):
            raise DataError("names and categories differ in length")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "categories", tuple(self.categories))
        object.__setattr__(self, "keys", tuple((str(a), int(b)) for a, b in self.keys))

    @classmethod
    def from_rows(cls, keys, rows):
        if not rows:
            raise DataError("no feature rows")
        names, cats = rows[0].names, rows[0].categories
        if any(r.names != names for r in rows):
            raise DataError("inconsistent column order across rows")
        return cls(np.vstack([r.values for r in rows]), names, cats, tuple(keys))

    def with_values(self, values):
        return FeatureMatrix(values, self.names, self.categories, self.keys)

    def take(self, rows):
        rows = np.asarray(rows, int)
        return FeatureMatrix(self.values[rows], self.names, self.categories, tuple(self.keys[i] for i in rows))

    def columns(self, keep):
        keep = list(keep)
        return FeatureMatrix(
            self.values[:, keep], [self.names[i] for i in keep], [self.categories[i] for i in keep], self.keys
        )


@dataclass(frozen=True, eq=False)
class ZScoreParams:
    mean: np.ndarray
    scale: np.ndarray  # 0 marks a constant column

    def apply_array(self, values):
        x = np.asarray(values, float) - self.mean
        safe = np.where(self.scale > 0, self.scale, 1.0)
        return np.where(self.scale > 0, x / safe, 0.0)

    def apply(self, matrix):
        return matrix.with_values(self.apply_array(matrix.values))

    def to_json(self, names=None):
        d = {"mean": [float(v) for v in self.mean], "scale": [float(v) for v in self.scale]}
        if names is not None:
            d["names"] = list(names)
        return d

    @classmethod
    def from_json(cls, d):
        return cls(np.array(d["mean"], float), np.array(d["scale"], float))


def fit_zscore(values):
    values = np.asarray(values, float)
    if values.shape[0] < 2:
        raise DataError("z-score normalization needs at least 2 rows")
    mean = values.mean(axis=0)
    const = np.ptp(values, axis=0) == 0
    scale = np.where(const, 0.0, values.std(axis=0))
    return ZScoreParams(mean, scale)


def zscore_normalize(matrix):
    """Column-wise z-score with population std; constant columns become 0."""
    params = fit_zscore(matrix.values)
    return params.apply(matrix), params


# --- serialization -------------------------------------------------------------

MANIFEST_PREFIX = "# manifest: "


def write_feature_matrix(path, matrix):
    manifest = ",".join(f"{n}:{c}" for n, c in zip(matrix.names, matrix.categories))
    lines = [MANIFEST_PREFIX + manifest, ",".join(("video_id", "pattern_id", *matrix.names))]
    for (vid, pid), row in zip(matrix.keys, matrix.values):
        lines.append(",".join([vid, str(pid), *(fmt_float(v) for v in row)]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_feature_matrix(path):
    try:
        with open(path, newline="") as fh:
            first = fh.readline()
            rows = list(csv.reader(fh))
    except OSError as e:
        raise DataError(f"{path}: cannot read ({e.strerror})") from e
    if not first.startswith(MANIFEST_PREFIX) or not rows:
        raise DataError(f"{path}: missing feature manifest line")
    pairs = [p.rsplit(":", 1) for p in first[len(MANIFEST_PREFIX):].strip().split(",")]
    names = [p[0] for p in pairs]
    cats = [p[1] for p in pairs]
    if rows[0][2:] != names:
        raise DataError(f"{path}: header does not match manifest")
    keys, vals = [], []
    for lineno, row in enumerate(rows[1:], start=3):
        if len(row) != len(names) + 2:
            raise DataError(f"{path}:{lineno}: expected {len(names) + 2} values")
        try:
            keys.append((row[0], int(row[1])))
            vals.append([float(v) for v in row[2:]])
        except ValueError as e:
            raise DataError(f"{path}:{lineno}: {e}") from None
    return FeatureMatrix(np.array(vals).reshape(len(keys), len(names)), names, cats, keys)


def write_zscore(path, params, names):
    atomic_write_json(path, params.to_json(names))


def read_zscore(path):
    with open(path) as fh:
        return ZScoreParams.from_json(json.load(fh))
