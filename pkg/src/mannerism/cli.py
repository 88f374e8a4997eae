"""Command-line pipeline: extract -> features -> train -> evaluate -> report.

Every command reads one JSON config (``--config``) whose keys can be
overridden with ``--set key.path=value``.  Relative paths in the config are
resolved against the config file's directory.  Outputs go under
``--output-dir`` (default ``<config dir>/out``) and are written atomically.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Failures print a single ``error[<kind>]: <message>`` line on stderr.
"""

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import synth
from ._io import atomic_write_json, atomic_write_text, fmt_float
from .errors import DataError, NumericalError
from .evaluation import (EvalReport, SplitSpec, derive_seed, fit_full, join_annotations,
                         run_evaluation, targets)
from .features import (CATEGORY_COUNTS, FeatureMatrix, VideoTracks, assemble_pattern_row,
                       fit_zscore, read_feature_matrix, write_feature_matrix, write_zscore)
from .metrics import auc, pearson
from .models import KINDS, MODES, ModelWeights, TrainConfig, backward_eliminate, columns_hash, predict
from .signal import (JointLayout, MultichannelSignal, load_annotations, load_face, load_lexicon,
                     load_prosody, load_signal, load_transcript, write_signal)
from .sisc import SolverConfig, extract_occurrences, fit, reconstruct

log = logging.getLogger("mannerism")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
TRACKS = ("signal", "transcript", "prosody", "face")
SOURCE_FILTERS = ("self", "crowd_average", "all")
OCCURRENCE_COLUMNS = ("video_id", "pattern_id", "start_s", "amplitude", "start_index", "end_s")


class UsageError(Exception):
    pass


# --- configuration ---------------------------------------------------------------

@dataclass
class ExtractSettings:
    lam: float = None  # required for extract; no universal value exists, pick it by a sweep
    n_patterns: int = 5
    pattern_seconds: float = 2.0
    max_iters: int = 500
    rel_tol: float = 1e-5
    min_amplitude_frac: float = 0.1
    center: bool = True


@dataclass
class EvaluateSettings:
    kinds: list = field(default_factory=lambda: list(KINDS))
    modes: list = field(default_factory=lambda: list(MODES))
    subsample_fraction: float = 1 / 3


@dataclass
class PipelineConfig:
    """Everything one pipeline run needs; see :func:`load_config` for the file layout."""

    base_dir: Path
    seed: int = 0
    jobs: int = 1
    output_dir: Path = None
    videos: list = field(default_factory=list)  # [{video_id, signal, transcript, prosody, face}]
    lexicon: Path = None
    annotations: Path = None
    face_map: dict = None
    layout: JointLayout = field(default_factory=JointLayout)
    solver: ExtractSettings = field(default_factory=ExtractSettings)
    train: TrainConfig = field(default_factory=TrainConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    evaluate: EvaluateSettings = field(default_factory=EvaluateSettings)
    lexical_count: int = CATEGORY_COUNTS["lexical"]

    def path(self, p):
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def out(self, *parts):
        return self.output_dir.joinpath(*parts)

    def solver_config(self, video_id):
        s = self.solver
        if s.lam is None:
            raise DataError("config: solver.lam is required for extract (set it in the config or with --set)")
        return SolverConfig(s.lam, s.n_patterns, s.pattern_seconds, s.max_iters, s.rel_tol,
                            derive_seed(self.seed, "sisc", video_id))

    def split_spec(self):
        return SplitSpec(self.split.n_repeats, self.split.test_fraction, derive_seed(self.seed, "evaluate"))


_SECTIONS = {"solver": ExtractSettings, "train": TrainConfig, "split": SplitSpec, "evaluate": EvaluateSettings}
_TOP_KEYS = {"seed", "jobs", "output_dir", "videos", "lexicon", "annotations", "face_map", "layout",
             "lexical_count", *_SECTIONS}


def _section(cls, d, name):
    if not isinstance(d, dict):
        raise DataError(f"config: {name} must be an object")
    known = {f.name for f in fields(cls)} - {"seed"}
    bad = sorted(set(d) - known)
    if bad:
        raise DataError(f"config: unknown key(s) in {name}: {', '.join(bad)}")
    kw = dict(d)
    if "lam_grid" in kw:
        kw["lam_grid"] = tuple(kw["lam_grid"])
    try:
        return cls(**kw)
    except TypeError as e:
        raise DataError(f"config: {name}: {e}") from None


def _apply_override(d, item):
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise UsageError(f"--set expects key.path=value, got {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.split(".")
    node = d
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise UsageError(f"--set {key}: {p} is not a section")
    node[parts[-1]] = value


def load_config(path=None, overrides=(), seed=None, jobs=None, output_dir=None):
    """Build a :class:`PipelineConfig` from a JSON file plus overrides.

    Top-level keys: ``seed``, ``jobs``, ``output_dir``, ``videos`` (list of
    ``{video_id, signal, transcript, prosody, face}`` paths), ``lexicon``,
    ``annotations``, ``face_map``, ``layout`` (``reference_joint``,
    ``tracked_joints``), ``lexical_count``, and the sections ``solver``,
    ``train``, ``split`` and ``evaluate``.
    """
    raw = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except OSError as e:
            raise DataError(f"{path}: cannot read config ({e.strerror})") from None
        except json.JSONDecodeError as e:
            raise DataError(f"{path}:{e.lineno}: invalid JSON ({e.msg})") from None
        if not isinstance(raw, dict):
            raise DataError(f"{path}: config must be a JSON object")
        base = path.resolve().parent
    for item in overrides:
        _apply_override(raw, item)
    bad = sorted(set(raw) - _TOP_KEYS)
    if bad:
        raise DataError(f"config: unknown key(s): {', '.join(bad)}")

    cfg = PipelineConfig(base_dir=base)
    cfg.seed = int(seed if seed is not None else raw.get("seed", 0))
    cfg.jobs = int(jobs if jobs is not None else raw.get("jobs", 1))
    if cfg.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    # a command-line output dir is relative to the working directory, a config one to the config
    if output_dir is not None:
        cfg.output_dir = Path(output_dir)
    else:
        cfg.output_dir = cfg.path(raw.get("output_dir", "out"))
    cfg.videos = []
    for i, v in enumerate(raw.get("videos", [])):
        if not isinstance(v, dict) or "video_id" not in v:
            raise DataError(f"config: videos[{i}] needs a video_id")
        cfg.videos.append({"video_id": str(v["video_id"]), **{k: cfg.path(v[k]) for k in TRACKS if k in v}})
    ids = [v["video_id"] for v in cfg.videos]
    if len(set(ids)) != len(ids):
        raise DataError("config: duplicate video_id")
    cfg.lexicon = cfg.path(raw.get("lexicon"))
    cfg.annotations = cfg.path(raw.get("annotations"))
    cfg.face_map = raw.get("face_map")
    lay = raw.get("layout", {})
    try:
        cfg.layout = JointLayout(
            reference_joint=int(lay.get("reference_joint", 0)),
            tracked_joints=tuple(lay.get("tracked_joints", JointLayout().tracked_joints)),
        )
    except (TypeError, ValueError) as e:
        raise DataError(f"config: layout: {e}") from None
    cfg.solver = _section(ExtractSettings, raw.get("solver", {}), "solver")
    cfg.train = _section(TrainConfig, raw.get("train", {}), "train")
    split = raw.get("split", {})
    cfg.split = _section(SplitSpec, split, "split")
    cfg.evaluate = _section(EvaluateSettings, raw.get("evaluate", {}), "evaluate")
    for k in cfg.evaluate.kinds:
        if k not in KINDS:
            raise DataError(f"config: unknown model kind {k!r}")
    for m in cfg.evaluate.modes:
        if m not in MODES:
            raise DataError(f"config: unknown mode {m!r}")
    cfg.lexical_count = int(raw.get("lexical_count", CATEGORY_COUNTS["lexical"]))
    return cfg


def _require(path, what):
    if path is None:
        raise DataError(f"config does not name a {what} file")
    if not Path(path).exists():
        raise DataError(f"{what} file not found: {path}")
    return path


def _map(fn, items, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


# --- extract ---------------------------------------------------------------------

def extract_video(cfg, video):
    """Fit patterns for one video; writes ``<vid>.sisc.json`` and ``<vid>.occurrences.csv``."""
    vid = video["video_id"]
    sig = load_signal(_require(video.get("signal"), f"signal ({vid})"))
    offset = sig.samples.mean(axis=0) if cfg.solver.center else np.zeros(sig.n_channels)
    centered = MultichannelSignal(sig.samples - offset, sig.sample_rate_hz, sig.channel_names)
    scfg = cfg.solver_config(vid)
    try:
        dictionary, acts, trace = fit(centered, scfg)
    except NumericalError as e:
        raise NumericalError(f"{vid}: {e}") from None
    m = dictionary.length
    resid = centered.samples - reconstruct(dictionary, acts, sig.n_samples).samples
    energy = float(np.sum(centered.samples ** 2))
    rel_error = float(np.sum(resid ** 2) / energy) if energy > 0 else 0.0
    occ = extract_occurrences(acts, m, sig.sample_rate_hz, cfg.solver.min_amplitude_frac)
    # sparse trains as {sample index: amplitude}
    sparse = [{str(i): float(a[i]) for i in np.flatnonzero(a)} for a in acts.trains]
    atomic_write_json(cfg.out("extract", f"{vid}.sisc.json"), {
        "video_id": vid,
        "sample_rate_hz": sig.sample_rate_hz,
        "n_samples": sig.n_samples,
        "channel_names": list(sig.channel_names),
        "channel_offset": offset.tolist(),
        "solver": asdict(scfg),
        "pattern_length": m,
        "patterns": dictionary.patterns.tolist(),
        "activations": sparse,
        "relative_error": rel_error,
        "trace": {"iterations": trace.iterations, "converged": trace.converged,
                  "objective": [float(v) for v in trace.objective]},
    })
    dur = m / sig.sample_rate_hz
    rows = [(vid, o.pattern_id, float(o.start_s), o.amplitude, o.start_index, float(o.start_s + dur)) for o in occ]
    atomic_write_text(cfg.out("extract", f"{vid}.occurrences.csv"), _csv_text(OCCURRENCE_COLUMNS, rows))
    log.info("%s: %d iterations, %d occurrences", vid, trace.iterations, len(rows))
    return vid, len(rows), rel_error


def cmd_extract(cfg, args):
    if not cfg.videos:
        raise DataError("config lists no videos")
    for vid, n, err in _map(lambda v: extract_video(cfg, v), cfg.videos, cfg.jobs):
        print(f"{vid}\t{n} occurrences\trelative_error={err:.4f}")


# --- features --------------------------------------------------------------------

def read_occurrences(path):
    """``{pattern_id: [(start_s, end_s), ...]}`` from an occurrences CSV."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise DataError(f"{path}: cannot read ({e.strerror}); run extract first") from None
    rows = list(csv.reader(text.splitlines()))
    if not rows or tuple(rows[0]) != OCCURRENCE_COLUMNS:
        raise DataError(f"{path}:1: expected header {','.join(OCCURRENCE_COLUMNS)}")
    windows = {}
    for lineno, r in enumerate(rows[1:], start=2):
        try:
            windows.setdefault(int(r[1]), []).append((float(r[2]), float(r[5])))
        except (ValueError, IndexError):
            raise DataError(f"{path}:{lineno}: malformed occurrence row") from None
    return windows


def _n_patterns(cfg, vid):
    p = cfg.out("extract", f"{vid}.sisc.json")
    try:
        return len(json.loads(p.read_text())["patterns"])
    except (OSError, KeyError, json.JSONDecodeError):
        raise DataError(f"{p}: missing or malformed; run extract first") from None


def load_tracks(video):
    vid = video["video_id"]
    missing = [k for k in TRACKS if video.get(k) is None or not Path(video[k]).exists()]
    if missing:
        raise DataError(f"video {vid}: missing track file(s): {', '.join(missing)}")
    return VideoTracks(vid, load_signal(video["signal"]), load_transcript(video["transcript"]),
                       load_prosody(video["prosody"]), load_face(video["face"]))


def video_rows(cfg, video, lexicon):
    vid = video["video_id"]
    tracks = load_tracks(video)
    windows = read_occurrences(cfg.out("extract", f"{vid}.occurrences.csv"))
    keys, rows = [], []
    for p in range(_n_patterns(cfg, vid)):
        if p not in windows:
            log.warning("%s: pattern %d has no occurrences; no feature row", vid, p)
            continue
        keys.append((vid, p))
        rows.append(assemble_pattern_row(tracks, windows[p], lexicon, cfg.layout, cfg.face_map))
    return keys, rows


def select_lexicon(cfg, matrix, lexicon):
    """Backward-eliminate lexical categories down to ``cfg.lexical_count``
    using crowd labels.  Returns the kept category names."""
    lex_cols = [i for i, c in enumerate(matrix.categories) if c == "lexical"]
    ann = load_annotations(_require(cfg.annotations, "annotations"))
    rows, ratings = join_annotations(matrix, ann, "crowd_average")
    X = matrix.values[rows][:, lex_cols]
    X = fit_zscore(X).apply_array(X)
    keep = backward_eliminate(X, targets(ratings, "classification"), cfg.lexical_count,
                              seed=derive_seed(cfg.seed, "select"))
    return [lexicon.names[i] for i in sorted(keep)]


def cmd_features(cfg, args):
    if not cfg.videos:
        raise DataError("config lists no videos")
    lexicon = load_lexicon(_require(cfg.lexicon, "lexicon"))

    def build(lex):
        parts = _map(lambda v: video_rows(cfg, v, lex), cfg.videos, cfg.jobs)
        keys = [k for ks, _ in parts for k in ks]
        rows = [r for _, rs in parts for r in rs]
        if not rows:
            raise DataError("no pattern has any occurrence; feature matrix would be empty")
        return FeatureMatrix.from_rows(keys, rows)

    matrix = build(lexicon)
    n_lex = len(lexicon.names)
    if n_lex > cfg.lexical_count:
        kept = select_lexicon(cfg, matrix, lexicon)
        atomic_write_json(cfg.out("features", "lexical_selection.json"),
                          {"kept": kept, "dropped": [c for c in lexicon.names if c not in kept]})
        lexicon = lexicon.subset(kept)
        matrix = build(lexicon)
    elif n_lex < cfg.lexical_count:
        log.warning("lexicon has %d categories, fewer than %d", n_lex, cfg.lexical_count)
    write_feature_matrix(cfg.out("features", "features.csv"), matrix)
    if len(matrix.keys) >= 2:
        z = fit_zscore(matrix.values)
        write_feature_matrix(cfg.out("features", "features_z.csv"), z.apply(matrix))
        write_zscore(cfg.out("features", "normalization.json"), z, matrix.names)
    else:
        log.warning("only one feature row; skipping normalization")
    print(f"{len(matrix.keys)} rows x {len(matrix.names)} columns")


# --- train -----------------------------------------------------------------------

def _features_path(cfg, args):
    return Path(args.features) if getattr(args, "features", None) else cfg.out("features", "features.csv")


def _annotations_path(cfg, args):
    if getattr(args, "annotations", None):
        return Path(args.annotations)
    return _require(cfg.annotations, "annotations")


def cmd_train(cfg, args):
    matrix = read_feature_matrix(_features_path(cfg, args))
    ann = load_annotations(_annotations_path(cfg, args))
    rows, ratings = join_annotations(matrix, ann, args.source)
    X = matrix.values[rows]
    y = targets(ratings, args.mode)
    if args.mode == "classification" and len(np.unique(y)) < 2:
        raise DataError(f"source {args.source}: training labels contain a single class")
    tcfg = cfg.train.replace(seed=derive_seed(cfg.seed, "train", args.kind, args.mode, args.source))
    model, z = fit_full(X, y, args.kind, args.mode, tcfg)
    model.columns_hash = columns_hash(matrix.names)
    pred = predict(model, z.apply_array(X))
    if args.mode == "classification":
        name, score = "train_auc", auc(pred, y)
    else:
        name = "train_r"
        score = pearson(pred, y) if np.ptp(pred) > 0 else 0.0
    path = cfg.out("models", f"{args.kind}_{args.mode}_{args.source}.json")
    atomic_write_json(path, {"model": model.to_json(), "normalization": z.to_json(matrix.names),
                             "n_rows": int(len(y)), name: score})
    print(f"{path}\t{name}={score:.4f}\trows={len(y)}")


def load_model(path):
    """Inverse of the train command's output: ``(ModelWeights, ZScoreParams dict)``."""
    d = json.loads(Path(path).read_text())
    return ModelWeights.from_json(d["model"]), d["normalization"]


# --- evaluate --------------------------------------------------------------------

def write_report_files(cfg, report):
    atomic_write_json(cfg.out("evaluation", "report.json"), report.to_json())
    atomic_write_text(cfg.out("evaluation", "roc.csv"),
                      _csv_text(("model", "annotation", "fpr", "tpr"), report.roc_rows()))
    atomic_write_text(cfg.out("evaluation", "weights.csv"),
                      _csv_text(("model", "task", "annotation", "category", "percent"), report.weight_rows()))
    atomic_write_text(cfg.out("evaluation", "summary.csv"),
                      _csv_text(("task", "model", "annotation", "metric", "mean", "std_error", "n"),
                                summary_rows(report)))


def summary_rows(report):
    for mode, kinds in report.metrics.items():
        metric = "auc" if mode == "classification" else "pearson_r"
        for kind, sets in kinds.items():
            for s, vals in sets.items():
                v = np.asarray(vals, float)
                se = float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
                yield mode, kind, s, metric, float(v.mean()), se, len(v)


def cmd_evaluate(cfg, args):
    matrix = read_feature_matrix(_features_path(cfg, args))
    ann = load_annotations(_annotations_path(cfg, args))
    ev = cfg.evaluate
    report = run_evaluation(matrix, ann, tuple(ev.kinds), tuple(ev.modes), cfg.split_spec(), cfg.train,
                            ev.subsample_fraction, cfg.jobs)
    write_report_files(cfg, report)
    for row in summary_rows(report):
        mode, kind, s, metric, mean, se, n = row
        print(f"{mode}\t{kind}\t{s}\t{metric}={mean:.4f}\tse={se:.4f}")
    for mode, kinds in report.ttests.items():
        for kind, t in kinds.items():
            if "p" in t:
                print(f"{mode}\t{kind}\tself_vs_crowd_subsampled\tt={t['t']:.4f}\tp={t['p']:.4g}")


# --- synth -----------------------------------------------------------------------

def cmd_synth(cfg, args):
    out = cfg.output_dir
    seed = cfg.seed
    if args.kind == "sisc":
        sig, true_dict, true_acts = synth.make_sisc_fixture(
            seed, n_samples=args.n_samples, n_channels=args.n_channels, n_patterns=args.n_patterns,
            length=args.length, occurrences=args.occurrences, noise=args.noise,
            sample_rate_hz=args.sample_rate)
        write_signal(out / "signal.csv", sig)
        starts = [np.flatnonzero(a).tolist() for a in true_acts.trains]
        atomic_write_json(out / "truth.json", {
            "seed": seed,
            "sample_rate_hz": sig.sample_rate_hz,
            "patterns": true_dict.patterns.tolist(),
            "activations": [{"pattern_id": d, "index": s, "value": true_acts.trains[d, s].tolist()}
                            for d, s in enumerate(starts)],
        })
        print(out / "signal.csv")
        return
    if args.kind == "toy":
        path = synth.write_toy_dataset(out, seed, n_videos=args.n_videos, seconds=args.seconds,
                                       rate_hz=args.sample_rate, n_patterns=args.n_patterns)
        print(path)
        return
    if args.kind == "classification":
        matrix, ann = synth.make_classification_fixture(
            seed, n_videos=args.n_videos, strength=args.strength, margin=args.margin,
            permute=args.permute)
    else:
        matrix, ann = synth.make_two_source_fixture(seed, n_videos=args.n_videos)
    from .signal import write_annotations

    write_feature_matrix(out / "features" / "features.csv", matrix)
    write_annotations(out / "annotations.csv", ann)
    print(out / "features" / "features.csv")


# --- report ----------------------------------------------------------------------

def cmd_report(cfg, args):
    from . import plotting

    src = Path(args.report) if args.report else cfg.out("evaluation", "report.json")
    try:
        report = EvalReport.from_json(json.loads(src.read_text()))
    except OSError as e:
        raise DataError(f"{src}: cannot read ({e.strerror}); run evaluate first") from None
    except (KeyError, json.JSONDecodeError) as e:
        raise DataError(f"{src}: malformed report ({e})") from None
    written = []
    for kind, curves in report.roc.items():
        p = cfg.out("report", f"roc_{kind}.png")
        plotting.save_png(plotting.roc_figure(curves, f"{kind}: mean ROC"), p)
        written.append(p)
    for mode, kinds in report.metrics.items():
        label = "AUC" if mode == "classification" else "Pearson r"
        for kind, sets in kinds.items():
            p = cfg.out("report", f"metrics_{mode}_{kind}.png")
            plotting.save_png(plotting.metric_figure(sets, label, f"{kind} ({mode})"), p)
            written.append(p)
    for mode, kinds in report.weights.items():
        for kind, shares in kinds.items():
            p = cfg.out("report", f"weights_{mode}_{kind}.png")
            plotting.save_png(plotting.weights_figure(shares, f"{kind} ({mode}): category weights"), p)
            written.append(p)
    rows = []
    for mode, kind, s, metric, mean, se, n in summary_rows(report):
        t = report.ttests.get(mode, {}).get(kind, {})
        rows.append((mode, kind, s, metric, mean, se, n, t.get("t", ""), t.get("p", "")))
    atomic_write_text(cfg.out("report", "table.csv"), _csv_text(
        ("task", "model", "annotation", "metric", "mean", "std_error", "n", "welch_t", "welch_p"), rows))
    written.append(cfg.out("report", "table.csv"))
    for p in written:
        print(p)


# --- argument parsing --------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    # SUPPRESS keeps a subcommand's defaults from clobbering flags given before it
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON pipeline config")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--jobs", type=int, help="worker threads")
    common.add_argument("--output-dir", help="output directory (default <config dir>/out)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key, e.g. solver.lam=0.05 (value parsed as JSON)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="mannerism", description="Repetitive-pattern extraction and mannerism classification.",
                parents=[common])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sub.add_parser("extract", parents=[common], help="learn patterns and occurrences per video")
    sub.add_parser("features", parents=[common], help="build the per-pattern feature matrix")

    t = sub.add_parser("train", parents=[common], help="fit one model on all joined rows")
    t.add_argument("--kind", required=True, choices=KINDS)
    t.add_argument("--mode", default="classification", choices=MODES)
    t.add_argument("--source", default="crowd_average", choices=SOURCE_FILTERS)
    t.add_argument("--features", help="feature CSV (default <output-dir>/features/features.csv)")
    t.add_argument("--annotations", help="annotation CSV (default from config)")

    e = sub.add_parser("evaluate", parents=[common], help="repeated-split evaluation for all sources")
    e.add_argument("--features", help="feature CSV (default <output-dir>/features/features.csv)")
    e.add_argument("--annotations", help="annotation CSV (default from config)")

    s = sub.add_parser("synth", parents=[common], help="write a synthetic fixture")
    s.add_argument("kind", choices=("sisc", "classification", "two-source", "toy"))
    s.add_argument("--n-samples", type=int, default=3000)
    s.add_argument("--n-channels", type=int, default=6)
    s.add_argument("--n-patterns", type=int, default=2)
    s.add_argument("--length", type=int, default=30)
    s.add_argument("--occurrences", type=int, default=10)
    s.add_argument("--noise", type=float, default=0.01)
    s.add_argument("--sample-rate", type=float, default=None)
    s.add_argument("--n-videos", type=int, default=None)
    s.add_argument("--seconds", type=float, default=20.0)
    s.add_argument("--strength", type=float, default=3.0)
    s.add_argument("--margin", type=float, default=0.0)
    s.add_argument("--permute", action="store_true")

    r = sub.add_parser("report", parents=[common], help="render figures and a table from an evaluation")
    r.add_argument("--report", help="report JSON (default <output-dir>/evaluation/report.json)")
    return p


COMMANDS = {
    "extract": cmd_extract,
    "features": cmd_features,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "synth": cmd_synth,
    "report": cmd_report,
}


def _synth_defaults(args):
    if args.command != "synth":
        return
    if args.sample_rate is None:
        args.sample_rate = 15.0 if args.kind == "toy" else 30.0
    if args.n_videos is None:
        args.n_videos = 8 if args.kind == "toy" else 90


def main(argv=None):
    logging.basicConfig(format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        for k in ("config", "seed", "jobs", "output_dir"):
            setattr(args, k, getattr(args, k, None))
        log.setLevel(logging.INFO if getattr(args, "verbose", False) else logging.WARNING)
        _synth_defaults(args)
        out = args.output_dir
        if args.command == "synth" and out is None and args.config is None:
            out = "."
        cfg = load_config(args.config, getattr(args, "set", []), args.seed, args.jobs, out)
        COMMANDS[args.command](cfg, args)
    except UsageError as e:
        print(f"error[usage]: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"error[data]: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"error[numerical]: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
