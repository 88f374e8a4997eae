"""Core data types and loaders for the input file formats.

Every time-indexed track uses float seconds. Window membership is the
half-open interval ``[start, end)`` so adjacent windows partition time.

File formats
------------
Signal CSV
    ``sample_rate_hz=<float>`` on line 1, comma-separated channel names on
    line 2, then one row of C floats per sample.
Transcript JSON-lines
    One object per token with keys ``text``, ``start_s``, ``end_s``, ``kind``
    (``word`` | ``filler`` | ``pause``).
Prosody CSV
    Columns ``t_s, loudness, pitch_hz, f1_hz, f2_hz, f3_hz, voiced``; pitch is
    empty on unvoiced frames, voiced is 0/1.
Face CSV
    Columns ``t_s, x0, y0, ..., x65, y65, pitch, yaw, roll`` (radians).
Lexicon
    Lines ``category: stem1 stem2 ...``; a trailing ``*`` is a prefix match.
Annotations CSV
    Columns ``video_id, pattern_id, rating, source`` with source ``self`` or
    ``crowd_average``.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from ._io import atomic_write_text, fmt_float
from .errors import DataError

TOKEN_KINDS = ("word", "filler", "pause")
ANNOTATION_SOURCES = ("self", "crowd_average")
N_LANDMARKS = 66


@dataclass(frozen=True, eq=False)
class MultichannelSignal:
    """An N x C real-valued sequence sampled at ``sample_rate_hz``."""

    samples: np.ndarray
    sample_rate_hz: float
    channel_names: tuple = ()

    def __post_init__(self):
        x = np.array(self.samples, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DataError(f"signal must be a non-empty N x C matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataError("signal contains non-finite values")
        if not (math.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise DataError(f"sample rate must be positive, got {self.sample_rate_hz}")
        names = tuple(self.channel_names) or tuple(f"ch{i}" for i in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DataError(f"{len(names)} channel names for {x.shape[1]} channels")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "channel_names", names)

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def n_channels(self):
        return self.samples.shape[1]

    @property
    def times(self):
        return np.arange(self.n_samples) / self.sample_rate_hz


KINECT_JOINTS = (
    "hip_center", "spine", "shoulder_center", "head",
    "shoulder_left", "elbow_left", "wrist_left", "hand_left",
    "shoulder_right", "elbow_right", "wrist_right", "hand_right",
    "hip_left", "knee_left", "ankle_left", "foot_left",
    "hip_right", "knee_right", "ankle_right", "foot_right",
)


@dataclass(frozen=True)
class JointLayout:
    """Skeleton layout: joint ``j`` occupies channels ``3j, 3j+1, 3j+2`` (x, y, z)."""

    joint_names: tuple = KINECT_JOINTS
    reference_joint: int = 0
    tracked_joints: tuple = (5, 9, 6, 10, 13, 17, 14, 18)

    def __post_init__(self):
        n = len(self.joint_names)
        idx = (self.reference_joint, *self.tracked_joints)
        if any(not 0 <= i < n for i in idx):
            raise DataError("joint index out of range")
        if len(set(self.tracked_joints)) != len(self.tracked_joints):
            raise DataError("tracked joints must be distinct")

    def channels(self, joint):
        return slice(3 * joint, 3 * joint + 3)


@dataclass(frozen=True)
class Token:
    text: str
    start_s: float
    end_s: float
    kind: str

    @property
    def mid_s(self):
        return 0.5 * (self.start_s + self.end_s)

    @property
    def duration_s(self):
        return self.end_s - self.start_s


@dataclass(frozen=True)
class AlignedTranscript:
    tokens: tuple = ()

    def __post_init__(self):
        toks = tuple(self.tokens)
        prev_end = -math.inf
        for i, t in enumerate(toks):
            if t.kind not in TOKEN_KINDS:
                raise DataError(f"token {i}: unknown kind {t.kind!r}")
            if not t.start_s < t.end_s:
                raise DataError(f"token {i}: start_s must be < end_s")
            if t.start_s < prev_end:
                raise DataError(f"token {i}: tokens overlap or are out of order")
            prev_end = t.end_s
        object.__setattr__(self, "tokens", toks)


@dataclass(frozen=True, eq=False)
class ProsodyTrack:
    """Frame-level loudness, pitch and formants; NaN marks absent values."""

    t_s: np.ndarray
    loudness: np.ndarray
    pitch_hz: np.ndarray
    formants_hz: np.ndarray  # F x 3
    voiced: np.ndarray

    def __post_init__(self):
        t = _readonly(self.t_s, float)
        n = len(t)
        arrays = {
            "loudness": _readonly(self.loudness, float),
            "pitch_hz": _readonly(self.pitch_hz, float),
            "formants_hz": _readonly(np.reshape(self.formants_hz, (n, 3)), float),
            "voiced": _readonly(self.voiced, bool),
        }
        if any(len(a) != n for a in arrays.values()):
            raise DataError("prosody columns differ in length")
        if n > 1 and not np.all(np.diff(t) > 0):
            raise DataError("prosody t_s must be strictly increasing")
        if np.any(np.isnan(arrays["pitch_hz"]) == arrays["voiced"]):
            raise DataError("pitch must be present exactly on voiced frames")
        object.__setattr__(self, "t_s", t)
        for k, v in arrays.items():
            object.__setattr__(self, k, v)


@dataclass(frozen=True, eq=False)
class FaceTrack:
    t_s: np.ndarray
    landmarks: np.ndarray  # F x 66 x 2 pixel coordinates
    pose: np.ndarray  # F x 3: pitch, yaw, roll in radians

    def __post_init__(self):
        t = _readonly(self.t_s, float)
        lm = _readonly(self.landmarks, float)
        pose = _readonly(self.pose, float)
        if lm.ndim != 3 or lm.shape[1:] != (N_LANDMARKS, 2) or len(lm) != len(t):
            raise DataError(f"landmarks must be F x {N_LANDMARKS} x 2, got {lm.shape}")
        if pose.shape != (len(t), 3):
            raise DataError("pose must be F x 3")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise DataError("face t_s must be strictly increasing")
        object.__setattr__(self, "t_s", t)
        object.__setattr__(self, "landmarks", lm)
        object.__setattr__(self, "pose", pose)


@dataclass(frozen=True)
class AnnotationRecord:
    video_id: str
    pattern_id: int
    rating: int
    source: str

    def __post_init__(self):
        if self.rating not in range(1, 8):
            raise DataError(f"rating must be in 1..7, got {self.rating}")
        if self.source not in ANNOTATION_SOURCES:
            raise DataError(f"unknown annotation source {self.source!r}")


@dataclass(frozen=True)
class CategoryLexicon:
    categories: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.categories:
            raise DataError("lexicon needs at least one category")
        for name, stems in self.categories.items():
            for s in stems:
                if not s or s == "*" or s != s.lower():
                    raise DataError(f"category {name!r}: bad stem {s!r}")

    @property
    def names(self):
        return list(self.categories)

    def matches(self, word, category):
        word = word.lower()
        for stem in self.categories[category]:
            if stem.endswith("*"):
                if word.startswith(stem[:-1]):
                    return True
            elif word == stem:
                return True
        return False

    def subset(self, names):
        return CategoryLexicon({n: self.categories[n] for n in names})


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _read_lines(path):
    try:
        return Path(path).read_text().splitlines()
    except OSError as e:
        raise DataError(f"{path}: cannot read ({e.strerror})") from e


def _parse_float(tok, where):
    try:
        return float(tok)
    except ValueError:
        raise DataError(f"{where}: not a number: {tok!r}") from None


# --- signal ---------------------------------------------------------------

def load_signal(path):
    """Read a signal CSV; errors carry the 1-based line number."""
    lines = _read_lines(path)
    if len(lines) < 3:
        raise DataError(f"{path}: expected header, channel names and at least one sample row")
    key, _, val = lines[0].partition("=")
    if key.strip() != "sample_rate_hz":
        raise DataError(f"{path}:1: expected 'sample_rate_hz=<float>'")
    rate = _parse_float(val.strip(), f"{path}:1")
    if not (math.isfinite(rate) and rate > 0):
        raise DataError(f"{path}:1: sample rate must be positive, got {rate}")
    names = [s.strip() for s in lines[1].split(",")]
    rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(names):
            raise DataError(f"{path}:{lineno}: expected {len(names)} values, got {len(parts)}")
        row = [_parse_float(p, f"{path}:{lineno}") for p in parts]
        if not all(math.isfinite(v) for v in row):
            raise DataError(f"{path}:{lineno}: non-finite value")
        rows.append(row)
    if not rows:
        raise DataError(f"{path}: no sample rows")
    return MultichannelSignal(np.array(rows), rate, tuple(names))


def write_signal(path, sig):
    out = [f"sample_rate_hz={fmt_float(sig.sample_rate_hz)}", ",".join(sig.channel_names)]
    out.extend(",".join(fmt_float(v) for v in row) for row in sig.samples)
    atomic_write_text(path, "\n".join(out) + "\n")


# --- transcript -----------------------------------------------------------

def load_transcript(path):
    tokens = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            tokens.append(Token(str(obj["text"]), float(obj["start_s"]), float(obj["end_s"]), obj["kind"]))
        except (ValueError, KeyError, TypeError) as e:
            raise DataError(f"{path}:{lineno}: bad token ({e})") from None
    try:
        return AlignedTranscript(tuple(tokens))
    except DataError as e:
        raise DataError(f"{path}: {e}") from None


def write_transcript(path, transcript):
    lines = [
        json.dumps({"text": t.text, "start_s": t.start_s, "end_s": t.end_s, "kind": t.kind})
        for t in transcript.tokens
    ]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


# --- prosody --------------------------------------------------------------

PROSODY_COLUMNS = ("t_s", "loudness", "pitch_hz", "f1_hz", "f2_hz", "f3_hz", "voiced")


def _opt(tok, where):
    tok = tok.strip()
    return math.nan if tok == "" else _parse_float(tok, where)


def load_prosody(path):
    rows = list(csv.reader(_read_lines(path)))
    if not rows or tuple(c.strip() for c in rows[0]) != PROSODY_COLUMNS:
        raise DataError(f"{path}:1: expected header {','.join(PROSODY_COLUMNS)}")
    cols = {k: [] for k in PROSODY_COLUMNS}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        where = f"{path}:{lineno}"
        if len(row) != len(PROSODY_COLUMNS):
            raise DataError(f"{where}: expected {len(PROSODY_COLUMNS)} values, got {len(row)}")
        cols["t_s"].append(_parse_float(row[0], where))
        cols["loudness"].append(_parse_float(row[1], where))
        for k, tok in zip(PROSODY_COLUMNS[2:6], row[2:6]):
            cols[k].append(_opt(tok, where))
        if row[6].strip() not in ("0", "1"):
            raise DataError(f"{where}: voiced must be 0 or 1")
        cols["voiced"].append(row[6].strip() == "1")
    try:
        return ProsodyTrack(
            np.array(cols["t_s"]),
            np.array(cols["loudness"]),
            np.array(cols["pitch_hz"]),
            np.column_stack([cols["f1_hz"], cols["f2_hz"], cols["f3_hz"]]) if cols["t_s"] else np.zeros((0, 3)),
            np.array(cols["voiced"], dtype=bool),
        )
    except DataError as e:
        raise DataError(f"{path}: {e}") from None


def write_prosody(path, track):
    def f(v):
        return "" if math.isnan(v) else fmt_float(v)

    out = [",".join(PROSODY_COLUMNS)]
    for i in range(len(track.t_s)):
        vals = [fmt_float(track.t_s[i]), fmt_float(track.loudness[i]), f(track.pitch_hz[i])]
        vals += [f(v) for v in track.formants_hz[i]]
        vals.append("1" if track.voiced[i] else "0")
        out.append(",".join(vals))
    atomic_write_text(path, "\n".join(out) + "\n")


# --- face -----------------------------------------------------------------

FACE_COLUMNS = ("t_s", *[f"{a}{i}" for i in range(N_LANDMARKS) for a in "xy"], "pitch", "yaw", "roll")


def load_face(path):
    lines = _read_lines(path)
    if not lines or tuple(c.strip() for c in lines[0].split(",")) != FACE_COLUMNS:
        raise DataError(f"{path}:1: expected face header t_s,x0,y0,...,x65,y65,pitch,yaw,roll")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(FACE_COLUMNS):
            raise DataError(f"{path}:{lineno}: expected {len(FACE_COLUMNS)} values, got {len(parts)}")
        rows.append([_parse_float(p, f"{path}:{lineno}") for p in parts])
    a = np.array(rows).reshape(len(rows), len(FACE_COLUMNS))
    try:
        return FaceTrack(a[:, 0], a[:, 1:-3].reshape(-1, N_LANDMARKS, 2), a[:, -3:])
    except DataError as e:
        raise DataError(f"{path}: {e}") from None


def write_face(path, track):
    out = [",".join(FACE_COLUMNS)]
    for t, lm, pose in zip(track.t_s, track.landmarks, track.pose):
        vals = [t, *lm.ravel(), *pose]
        out.append(",".join(fmt_float(v) for v in vals))
    atomic_write_text(path, "\n".join(out) + "\n")


# --- lexicon & annotations -----------------------------------------------

def load_lexicon(path):
    cats = {}
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        name, sep, rest = line.partition(":")
        if not sep or not name.strip():
            raise DataError(f"{path}:{lineno}: expected 'category: stem ...'")
        cats[name.strip()] = rest.lower().split()
    try:
        return CategoryLexicon(cats)
    except DataError as e:
        raise DataError(f"{path}: {e}") from None


def write_lexicon(path, lexicon):
    lines = [f"{k}: {' '.join(v)}" for k, v in lexicon.categories.items()]
    atomic_write_text(path, "\n".join(lines) + "\n")


ANNOTATION_COLUMNS = ("video_id", "pattern_id", "rating", "source")


def load_annotations(path):
    rows = list(csv.reader(_read_lines(path)))
    if not rows or tuple(c.strip() for c in rows[0]) != ANNOTATION_COLUMNS:
        raise DataError(f"{path}:1: expected header {','.join(ANNOTATION_COLUMNS)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise DataError(f"{path}:{lineno}: expected 4 values, got {len(row)}")
        vid, pid, rating, source = (c.strip() for c in row)
        try:
            out.append(AnnotationRecord(vid, int(pid), int(rating), source))
        except ValueError as e:
            raise DataError(f"{path}:{lineno}: {e}") from None
    return out


def write_annotations(path, records):
    out = [",".join(ANNOTATION_COLUMNS)]
    out += [f"{r.video_id},{r.pattern_id},{r.rating},{r.source}" for r in records]
    atomic_write_text(path, "\n".join(out) + "\n")


def quantize_crowd_ratings(ratings):
    """Average several 1..7 ratings into one bin: mean rounded half-up.

    >>> quantize_crowd_ratings([4, 5])
    5
    """
    ratings = list(ratings)
    if not ratings:
        raise DataError("cannot quantize an empty list of ratings")
    if any(r not in range(1, 8) for r in ratings):
        raise DataError("ratings must be in 1..7")
    mean = Fraction(sum(ratings), len(ratings))
    return min(7, max(1, math.floor(mean + Fraction(1, 2))))
