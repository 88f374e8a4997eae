"""Synthetic fixtures with known ground truth.

``make_sisc_fixture`` plants smooth patterns at well-separated positions so
that pattern recovery can be scored.  The classification generators plant a
linear signal in chosen feature categories.
"""

import numpy as np

from .errors import DataError
from .sisc import ActivationSet, PatternDictionary, _model
from .signal import MultichannelSignal


def smooth_patterns(rng, n_patterns, length, n_channels, n_harmonics=3):
    """Random band-limited patterns tapered to zero at both ends, unit Frobenius norm."""
    t = np.linspace(0.0, 1.0, length)
    taper = np.sin(np.pi * t)
    out = np.zeros((n_patterns, length, n_channels))
    for d in range(n_patterns):
        for c in range(n_channels):
            k = np.arange(1, n_harmonics + 1)
            amp = rng.normal(size=n_harmonics) / k
            phase = rng.uniform(0, 2 * np.pi, size=n_harmonics)
            out[d, :, c] = taper * np.sum(amp[:, None] * np.sin(2 * np.pi * k[:, None] * t + phase[:, None]), axis=0)
        out[d] /= np.linalg.norm(out[d])
    return out


def separated_starts(rng, n_starts, n_samples, length, min_gap=None):
    """Random start indices in ``[0, n_samples - length]`` at least ``min_gap`` apart."""
    gap = length if min_gap is None else min_gap
    hi = n_samples - length
    if n_starts * gap > hi + gap:
        raise DataError(f"cannot place {n_starts} occurrences of length {length} in {n_samples} samples")
    # sample the slack between occurrences, which guarantees separation
    slack = hi - (n_starts - 1) * gap
    cuts = np.sort(rng.integers(0, slack + 1, size=n_starts))
    return cuts + gap * np.arange(n_starts)


def make_sisc_fixture(
    seed,
    n_samples=3000,
    n_channels=6,
    n_patterns=2,
    length=30,
    occurrences=10,
    noise=0.01,
    amplitude=(2.0, 4.0),
    sample_rate_hz=30.0,
):
    """Return ``(signal, true_dictionary, true_activations)``.

    With ``noise == 0`` the signal equals ``reconstruct(true_dictionary,
    true_activations)`` exactly.
    """
    if min(n_samples, n_channels, n_patterns, length, occurrences) < 1 or noise < 0:
        raise DataError("invalid sisc fixture parameters")
    rng = np.random.default_rng(seed)
    psi = smooth_patterns(rng, n_patterns, length, n_channels)
    starts = separated_starts(rng, n_patterns * occurrences, n_samples, length)
    owner = rng.permutation(np.repeat(np.arange(n_patterns), occurrences))
    alpha = np.zeros((n_patterns, n_samples))
    alpha[owner, starts] = rng.uniform(*amplitude, size=len(starts))
    x = _model(psi, alpha, n_samples)
    if noise > 0:
        x = x + noise * rng.normal(size=x.shape)
    names = tuple(f"ch{i}" for i in range(n_channels))
    return (
        MultichannelSignal(x, sample_rate_hz, names),
        PatternDictionary(psi, sample_rate_hz),
        ActivationSet(alpha),
    )


def shift_ncc(a, b):
    """Best normalized cross-correlation of two M x C patterns over all time shifts.

    Computed by exhaustive search over every relative shift with zero padding;
    the score ignores amplitude.  Returns ``(score, shift)`` where ``shift`` is
    how far ``b`` lies to the right of ``a``.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0, 0
    m = a.shape[0]
    best, best_s = -np.inf, 0
    for s in range(-(m - 1), m):
        if s >= 0:
            v = np.sum(a[: m - s] * b[s:])
        else:
            v = np.sum(a[-s:] * b[: m + s])
        if v > best:
            best, best_s = v, s
    return float(best / (na * nb)), best_s


def match_patterns(true_patterns, found_patterns):
    """For every true pattern, the best shift-aligned NCC against any found pattern."""
    return [max((shift_ncc(t, f)[0] for f in found_patterns), default=0.0) for t in true_patterns]


# --- feature-level fixtures ----------------------------------------------------

DEMO_LEXICON = {
    "posemo": ["happ*", "good", "great", "love*", "nice"],
    "negemo": ["bad", "hate*", "awful", "worr*"],
    "anx": ["nervous*", "afraid", "tense"],
    "anger": ["angr*", "mad", "annoy*"],
    "sad": ["sad*", "cry*", "lonel*"],
    "insight": ["think*", "know*", "realiz*", "understand*"],
    "cause": ["because", "effect*", "reason*", "hence"],
    "discrep": ["should", "would", "could", "need*"],
    "tentat": ["maybe", "perhaps", "guess*"],
    "certain": ["always", "never", "definite*", "sure*"],
    "see": ["see*", "look*", "view*"],
    "hear": ["hear*", "listen*", "sound*"],
    "feel": ["feel*", "touch*", "warm*"],
    "body": ["hand*", "head*", "arm*", "leg*"],
    "ingest": ["eat*", "food*", "drink*"],
    "social": ["talk*", "share*", "friend*", "people"],
    "family": ["famil*", "mother*", "father*"],
    "humans": ["adult*", "child*", "person*"],
    "percept": ["observ*", "notic*"],
    "work": ["work*", "job*", "project*"],
    "achieve": ["win*", "success*", "achiev*"],
    "money": ["money", "cash*", "pay*"],
    "time": ["today", "now", "year*", "week*"],
}

FILLERS = ("um", "uh", "er", "like")


def demo_lexicon():
    from .signal import CategoryLexicon

    return CategoryLexicon({k: list(v) for k, v in DEMO_LEXICON.items()})


def demo_manifest():
    from .features import feature_manifest
    from .signal import JointLayout

    return feature_manifest(JointLayout(), demo_lexicon())


def _ratings_from_latent(latent):
    latent = (latent - latent.mean()) / (latent.std() or 1.0)
    return np.clip(4 + np.floor(1.2 * latent), 1, 7).astype(int)


def _driven_latent(rng, X, cats, drivers, n_informative, strength):
    """Latent score along a random signed direction in the driver columns.

    Returns ``(latent, columns, signs)``.
    """
    cols = [i for i, c in enumerate(cats) if c in drivers]
    if not cols:
        raise DataError(f"no columns in categories {drivers}")
    chosen = rng.choice(cols, size=min(n_informative, len(cols)), replace=False)
    signs = rng.choice([-1.0, 1.0], size=len(chosen))
    s = X[:, chosen] @ signs
    s = (s - s.mean()) / (s.std() or 1.0)
    return strength * s + rng.normal(size=len(X)), chosen, signs


def make_classification_fixture(seed, n_videos=90, patterns_per_video=4, strength=3.0,
                                drivers=("prosody", "body"), n_informative=8, permute=False,
                                margin=0.0):
    """Feature matrix with ratings from a planted linear signal.

    Returns ``(FeatureMatrix, annotations)`` with one ``crowd_average`` record
    per row.  ``strength`` scales the signal against unit noise; ``margin``
    additionally pushes the informative columns of the two classes
    (rating >= 4 vs < 4) apart by ``margin`` each way.  With ``permute`` the
    ratings are shuffled across rows, breaking any link.
    """
    from .features import FeatureMatrix
    from .signal import AnnotationRecord

    if n_videos < 1 or patterns_per_video < 1 or strength < 0:
        raise DataError("invalid classification fixture parameters")
    rng = np.random.default_rng(seed)
    names, cats = demo_manifest()
    keys = [(f"v{v:03d}", p) for v in range(n_videos) for p in range(patterns_per_video)]
    X = rng.normal(size=(len(keys), len(names)))
    latent, cols, signs = _driven_latent(rng, X, cats, set(drivers), n_informative, strength)
    ratings = _ratings_from_latent(latent)
    if margin:
        side = np.where(ratings >= 4, 1.0, -1.0)
        X[:, cols] += margin * side[:, None] * signs[None, :]
    if permute:
        ratings = rng.permutation(ratings)
    ann = [AnnotationRecord(v, p, int(r), "crowd_average") for (v, p), r in zip(keys, ratings)]
    return FeatureMatrix(X, names, cats, keys), ann


def make_two_source_fixture(seed, n_videos=90, patterns_per_video=4, crowd_strength=2.5,
                            self_strength=0.8, self_video_fraction=1 / 3, n_informative=8):
    """Crowd ratings driven by non-verbal features, self ratings by lexical ones.

    Self ratings exist only for the first ``self_video_fraction`` of videos
    and carry a weaker signal.
    """
    from .features import FeatureMatrix
    from .signal import AnnotationRecord

    rng = np.random.default_rng(seed)
    names, cats = demo_manifest()
    keys = [(f"v{v:03d}", p) for v in range(n_videos) for p in range(patterns_per_video)]
    X = rng.normal(size=(len(keys), len(names)))
    crowd_lat, _, _ = _driven_latent(
        rng, X, cats, {"prosody", "body", "face", "disfluency"}, n_informative, crowd_strength)
    crowd = _ratings_from_latent(crowd_lat)
    n_self = int(round(self_video_fraction * n_videos)) * patterns_per_video
    self_lat, _, _ = _driven_latent(rng, X[:n_self], cats, {"lexical"}, n_informative, self_strength)
    own = _ratings_from_latent(self_lat)
    ann = [AnnotationRecord(v, p, int(r), "crowd_average") for (v, p), r in zip(keys, crowd)]
    ann += [AnnotationRecord(v, p, int(r), "self") for (v, p), r in zip(keys[:n_self], own)]
    return FeatureMatrix(X, names, cats, keys), ann


# --- raw-track toy dataset -----------------------------------------------------

# rest pose (metres, x right / y up / z depth) for the 20-joint skeleton
_REST_POSE = np.array([
    [0.0, 0.9, 2.5], [0.0, 1.2, 2.5], [0.0, 1.45, 2.5], [0.0, 1.65, 2.5],
    [-0.2, 1.4, 2.5], [-0.28, 1.15, 2.5], [-0.3, 0.92, 2.45], [-0.3, 0.85, 2.45],
    [0.2, 1.4, 2.5], [0.28, 1.15, 2.5], [0.3, 0.92, 2.45], [0.3, 0.85, 2.45],
    [-0.1, 0.85, 2.5], [-0.12, 0.48, 2.5], [-0.12, 0.08, 2.5], [-0.12, 0.0, 2.45],
    [0.1, 0.85, 2.5], [0.12, 0.48, 2.5], [0.12, 0.08, 2.5], [0.12, 0.0, 2.45],
])
_ARM_JOINTS = (5, 6, 7, 9, 10, 11)


def _q(x, bits=10):
    # snap to a binary grid so the text files stay short and round-trip exactly
    return np.round(np.asarray(x, float) * 2 ** bits) / 2 ** bits


def _toy_signal(rng, n, rate, motions, per_motion, length):
    from .signal import KINECT_JOINTS

    x = np.tile(_REST_POSE.ravel(), (n, 1))
    x += 0.01 * rng.normal(size=(1, x.shape[1]))  # per-subject build
    sway = 0.01 * np.sin(2 * np.pi * 0.2 * np.arange(n) / rate + rng.uniform(0, 2 * np.pi))
    x[:, 0::3] += sway[:, None]  # whole-body sway, removed by the reference joint
    arm_ch = np.concatenate([np.arange(3 * j, 3 * j + 3) for j in _ARM_JOINTS])
    starts = separated_starts(rng, len(motions) * per_motion, n, length, min_gap=length + 2)
    owner = rng.permutation(np.repeat(np.arange(len(motions)), per_motion))
    for s, d in zip(starts, owner):
        x[s:s + length, arm_ch] += rng.uniform(0.8, 1.2) * motions[d]
    x += 0.002 * rng.normal(size=x.shape)
    names = tuple(f"{j}_{a}" for j in KINECT_JOINTS for a in "xyz")
    return MultichannelSignal(_q(x), rate, names)


def _toy_transcript(rng, seconds, lexicon):
    from .signal import AlignedTranscript, Token

    stems = [s.rstrip("*") + ("ing" if s.endswith("*") else "") for v in lexicon.values() for s in v]
    neutral = ("the", "a", "and", "it", "was", "so", "we", "then")
    toks, t = [], 0.0
    while True:
        u = rng.uniform()
        if u < 0.08:
            kind, text, dur = "pause", "", rng.uniform(0.3, 1.0)
        elif u < 0.18:
            kind, text, dur = "filler", str(rng.choice(FILLERS)), rng.uniform(0.2, 0.5)
        else:
            pool = stems if rng.uniform() < 0.35 else neutral
            kind, text, dur = "word", str(rng.choice(pool)), rng.uniform(0.15, 0.45)
        dur = float(_q(dur, 6)) or 2 ** -6
        if t + dur > seconds:
            break
        toks.append(Token(text, t, t + dur, kind))
        t = float(t + dur + _q(rng.uniform(0, 0.1), 6))
    return AlignedTranscript(tuple(toks))


def _toy_prosody(rng, seconds, rate):
    from .signal import ProsodyTrack

    t = np.arange(int(seconds * rate)) / rate
    voiced = rng.uniform(size=len(t)) < 0.6
    loud = 60 + 8 * np.sin(2 * np.pi * 0.3 * t) + rng.normal(0, 2, len(t))
    pitch = np.where(voiced, 120 + 25 * np.sin(2 * np.pi * 0.5 * t) + rng.normal(0, 5, len(t)), np.nan)
    base = np.array([500.0, 1500.0, 2500.0])
    formants = base + rng.normal(0, 40, (len(t), 3))
    formants[~voiced] = np.nan
    return ProsodyTrack(_q(t, 12), _q(loud, 4), _q(pitch, 4), _q(formants, 2), voiced)


def _toy_face(rng, seconds, rate):
    from .signal import N_LANDMARKS, FaceTrack

    base = np.zeros((N_LANDMARKS, 2))
    base[:, 0] = 320 + 80 * np.cos(np.linspace(0, 2 * np.pi, N_LANDMARKS, endpoint=False))
    base[:, 1] = 240 + 100 * np.sin(np.linspace(0, 2 * np.pi, N_LANDMARKS, endpoint=False))
    base[36:42] = [[270, 220], [280, 214], [292, 214], [302, 220], [292, 226], [280, 226]]
    base[42:48] = [[338, 220], [348, 214], [360, 214], [370, 220], [360, 226], [348, 226]]
    base[17:22] = [[262, 200], [272, 194], [284, 192], [296, 194], [306, 198]]
    base[22:27] = [[334, 198], [344, 194], [356, 192], [368, 194], [378, 200]]
    base[48:60] = [[290, 300], [300, 294], [310, 292], [320, 293], [330, 292], [340, 294],
                   [350, 300], [340, 308], [330, 311], [320, 312], [310, 311], [300, 308]]
    t = np.arange(int(seconds * rate)) / rate
    lm = base[None] + rng.normal(0, 1.5, (len(t), N_LANDMARKS, 2))
    pose = rng.normal(0, 0.08, (len(t), 3))
    return FaceTrack(_q(t, 12), np.round(lm), _q(pose))


def write_toy_dataset(out_dir, seed, n_videos=8, seconds=20.0, rate_hz=15.0, n_patterns=2,
                      self_video_fraction=0.5):
    """Write raw tracks, lexicon, annotations and a pipeline config for a
    small multi-video dataset.  Returns the path of the config file.

    Every video plants the same ``n_patterns`` arm motions, 1 s long, four
    times each, so pattern extraction has something to find.
    """
    from pathlib import Path

    from ._io import atomic_write_json
    from .signal import (AnnotationRecord, write_annotations, write_face, write_lexicon,
                         write_prosody, write_signal, write_transcript)

    if n_videos < 1 or n_patterns < 1 or not seconds > 0 or not rate_hz > 0:
        raise DataError("invalid toy dataset parameters")
    out = Path(out_dir)
    rng = np.random.default_rng(seed)
    length = int(round(rate_hz))
    motions = 0.15 * smooth_patterns(rng, n_patterns, length, 3 * len(_ARM_JOINTS)) * np.sqrt(length)
    videos, ann = [], []
    n_self = int(round(self_video_fraction * n_videos))

    def balanced_ratings(k):
        # half meaningful (4..7), half mannerism (1..3), in random order
        high = rng.permutation(k) < (k + 1) // 2
        return np.where(high, rng.integers(4, 8, size=k), rng.integers(1, 4, size=k))

    crowd = balanced_ratings(n_videos * n_patterns).reshape(n_videos, n_patterns)
    own = balanced_ratings(max(n_self, 1) * n_patterns).reshape(-1, n_patterns)
    for v in range(n_videos):
        vid = f"toy{v:02d}"
        n = int(seconds * rate_hz)
        write_signal(out / "tracks" / f"{vid}.signal.csv", _toy_signal(rng, n, rate_hz, motions, 4, length))
        write_transcript(out / "tracks" / f"{vid}.transcript.jsonl", _toy_transcript(rng, seconds, DEMO_LEXICON))
        write_prosody(out / "tracks" / f"{vid}.prosody.csv", _toy_prosody(rng, seconds, 10.0))
        write_face(out / "tracks" / f"{vid}.face.csv", _toy_face(rng, seconds, rate_hz))
        videos.append({k: f"tracks/{vid}.{k}.{ext}" for k, ext in
                       (("signal", "csv"), ("transcript", "jsonl"), ("prosody", "csv"), ("face", "csv"))})
        videos[-1]["video_id"] = vid
        for p in range(n_patterns):
            ann.append(AnnotationRecord(vid, p, int(crowd[v, p]), "crowd_average"))
            if v < n_self:
                ann.append(AnnotationRecord(vid, p, int(own[v, p]), "self"))
    write_lexicon(out / "lexicon.txt", demo_lexicon())
    write_annotations(out / "annotations.csv", ann)
    config = {
        "seed": int(seed),
        "videos": videos,
        "lexicon": "lexicon.txt",
        "annotations": "annotations.csv",
        "solver": {"lam": 0.01, "n_patterns": n_patterns, "pattern_seconds": 1.0, "max_iters": 150},
        "train": {"lam": 0.01, "svm_iters": 500, "nn_epochs": 300},
        "split": {"n_repeats": 5, "test_fraction": 0.25},
    }
    path = out / "config.json"
    atomic_write_json(path, config)
    return path
