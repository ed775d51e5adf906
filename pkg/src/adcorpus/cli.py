"""Command-line entry point.

    adcorpus [options] <command> ...

Every command accepts ``--config FILE`` plus one ``--section.key VALUE`` flag
per config key; flags override the file. JSON results go to ``--out`` or
standard output, warnings to standard error. Exit codes: 0 success, 1 usage,
2 input/format/config error, 3 processing error (with ``--strict``, a
low-confidence offset counts as one).
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import logging
import platform
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__, audio, corpus, isolate, metrics, segment, sync, synthetic, textalign
from .config import SCALAR_KEYS, Config, load_config
from .errors import (AdCorpusError, InputError, LowConfidenceWarning, MalformedJson,
                     ProcessingError)

log = logging.getLogger("adcorpus")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_PROCESSING = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


_TYPES = {"float": float, "int": int, "bool": _bool, "str": str}


def _field_types():
    out = {}
    for sec in dataclasses.fields(Config):
        for f in dataclasses.fields(sec.default_factory()):
            out[f"{sec.name}.{f.name}"] = _TYPES.get(str(f.type), str)
    return out


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="TOML config file")
    g.add_argument("--strict", action="store_true",
                   help="treat a low-confidence offset estimate as an error")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    types = _field_types()
    for key in SCALAR_KEYS:
        names = [f"--{key}"] + (["--workers"] if key == "pipeline.workers" else [])
        g.add_argument(*names, dest=f"cfg:{key}", type=types[key], metavar="V",
                       default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="adcorpus", description="Audio-description corpus tools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def cmd(name, help_):
        return sub.add_parser(name, help=help_, parents=[common])

    p = cmd("sync", "estimate the offset of track B relative to track A")
    p.add_argument("--a", required=True, help="reference WAV")
    p.add_argument("--b", required=True, help="WAV to align")
    p.add_argument("--out")

    p = cmd("isolate", "center extraction (one input) or NLMS residual (two inputs)")
    p.add_argument("--primary", required=True, help="stereo WAV, or the signal to clean")
    p.add_argument("--reference", help="WAV the canceller predicts from")
    p.add_argument("--out", required=True, help="output WAV")
    p.add_argument("--bit-depth", type=int, choices=(16, 32), default=16)

    p = cmd("segment", "detect narration segments")
    p.add_argument("mode", choices=("auto", "semi"))
    p.add_argument("--movie", required=True, help="movie soundtrack WAV")
    p.add_argument("--ad", required=True, help="AD track (auto) or AD-mixed track (semi)")
    p.add_argument("--out")

    p = cmd("parse-srt", "parse a subtitle file")
    p.add_argument("path")
    p.add_argument("--out")

    p = cmd("parse-script", "classify screenplay lines")
    p.add_argument("path")
    p.add_argument("--out")

    p = cmd("align-script", "time script descriptions via subtitles")
    p.add_argument("--script", required=True)
    p.add_argument("--srt", required=True)
    p.add_argument("--movie-id", default="")
    p.add_argument("--out")
    p.add_argument("--dropped", help="also write sentences below align.min_score here")

    p = cmd("build-corpus", "assemble corpus entries and splits from timed sentences")
    p.add_argument("inputs", nargs="+", help="JSON arrays of timed sentences")
    p.add_argument("--durations", required=True, help="movie_id,duration_sec CSV")
    p.add_argument("--lexicon", help="character names, one per line")
    p.add_argument("--patterns", help="drop patterns, one regex per line")
    p.add_argument("--splits", help="movie_id,split CSV")
    p.add_argument("--out-dir", required=True)

    p = cmd("stats", "corpus, vocabulary and description statistics")
    p.add_argument("--corpus", required=True, help="corpus JSONL")
    p.add_argument("--hypotheses", help="submission JSON for description statistics")
    p.add_argument("--train", help="training JSONL (novelty reference)")
    p.add_argument("--report", help="eval report with per_sentence scores for a difficulty curve")
    p.add_argument("--sort-key", choices=("length_asc", "word_freq_desc"), default="length_asc")
    p.add_argument("--window", type=int, default=500)
    p.add_argument("--out")

    p = cmd("eval", "score a submission against reference sentences")
    p.add_argument("--submission", required=True)
    p.add_argument("--refs", required=True, help="reference JSONL")
    p.add_argument("--per-sentence", action="store_true")
    p.add_argument("--out")

    p = cmd("nn-baseline", "nearest-neighbour caption retrieval")
    p.add_argument("--test-features", required=True, help="JSONL of {id, values}")
    p.add_argument("--train-features", required=True)
    p.add_argument("--train", required=True, help="training JSONL with sentences")
    p.add_argument("--out")

    p = cmd("upper-bound", "oracle retrieval score of the training sentences")
    p.add_argument("--refs", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--metric", choices=sorted(_PAIR_METRICS), default="meteor_lite")
    p.add_argument("--out")

    p = cmd("pipeline", "run every stage for the movies listed in the config")
    p.add_argument("--out-dir", help="overrides pipeline.out_dir")

    p = cmd("make-fixture", "write the synthetic test fixture")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=0)
    return parser


_PAIR_METRICS = {
    "meteor_lite": metrics.meteor_lite_pair,
    "rouge_l": metrics.rouge_l_pair,
    "bleu_4": lambda h, r: metrics.sentence_bleu(h, r)[3],
}


# -- helpers ----------------------------------------------------------------------

def _config(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    for key, value in vars(args).items():
        if key.startswith("cfg:"):
            cfg.set(key[4:], value)
    return cfg


def _emit(text, out):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, ensure_ascii=False) + "\n"


def _read_text(path):
    return Path(path).read_text(encoding="utf-8-sig")


def _read_json(path):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"{path}: {exc}") from exc


def _read_sentences(path):
    data = _read_json(path)
    if not isinstance(data, list):
        raise MalformedJson(f"{path}: expected a JSON array")
    try:
        return [textalign.AlignedSentence(**d) for d in data]
    except TypeError as exc:
        raise MalformedJson(f"{path}: {exc}") from exc


def _read_corpus(path):
    try:
        return corpus.read_jsonl(path)
    except TypeError as exc:
        raise MalformedJson(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"{path}: {exc}") from exc


def _report_srt(warns, path):
    for w in warns:
        print(f"warning: {path}: {w}", file=sys.stderr)


def align_script_text(script_text, srt_text, movie_id, cfg, srt_name="srt"):
    """Parse, align and time one script; returns ``(kept, dropped)`` sentences."""
    subs, warns = textalign.parse_srt(srt_text)
    _report_srt(warns, srt_name)
    elements = textalign.parse_script(script_text)
    dialogues = [e for e in elements if e.kind == textalign.DIALOGUE]
    alignment = textalign.align_dialogue(dialogues, subs, cfg.align.gap_penalty)
    sentences = textalign.infer_timestamps(alignment, elements, subs, movie_id,
                                           cfg.align.edge_span_sec)
    return textalign.reliability_filter(sentences, cfg.align.min_score)


def _stats_payload(entries):
    by_source = {}
    for src in corpus.SOURCES:
        part = [e for e in entries if e.source == src]
        if part:
            by_source[src] = corpus.corpus_stats(part).to_dict()
    return {
        "corpus": corpus.corpus_stats(entries).to_dict(),
        "by_source": by_source,
        "vocab": corpus.vocab_stats(entries),
    }


# -- commands -----------------------------------------------------------------------

def cmd_sync(args, cfg):
    a = audio.to_mono(audio.load_wav(args.a))
    b = audio.to_mono(audio.load_wav(args.b))
    est = sync.estimate_offset(a, b, cfg.sync.max_lag_sec, cfg.sync.low_confidence_ratio)
    _emit(_dumps(est.to_dict()), args.out)


def cmd_isolate(args, cfg):
    primary = audio.load_wav(args.primary)
    if args.reference is None:
        out = isolate.extract_center(primary, cfg.isolate.side_gain)
    else:
        out = isolate.nlms_cancel(audio.to_mono(primary),
                                  audio.to_mono(audio.load_wav(args.reference)),
                                  cfg.isolate.taps, cfg.isolate.mu, cfg.isolate.eps)
    audio.write_wav(out, args.out, args.bit_depth)


def cmd_segment(args, cfg):
    run = segment.analyze_auto if args.mode == "auto" else segment.analyze_semi
    result = run(args.movie, args.ad, cfg)
    _emit(segment.segments_to_json(result.segments), args.out)


def cmd_parse_srt(args, cfg):
    subs, warns = textalign.parse_srt(_read_text(args.path))
    _report_srt(warns, args.path)
    _emit(textalign.subtitles_to_json(subs), args.out)


def cmd_parse_script(args, cfg):
    _emit(textalign.elements_to_json(textalign.parse_script(_read_text(args.path))), args.out)


def cmd_align_script(args, cfg):
    kept, dropped = align_script_text(_read_text(args.script), _read_text(args.srt),
                                      args.movie_id, cfg, args.srt)
    _emit(textalign.sentences_to_json(kept), args.out)
    if args.dropped:
        _emit(textalign.sentences_to_json(dropped), args.dropped)


def _write_corpus(sentences, durations, cfg, lexicon, patterns, splits, out_dir):
    names = corpus.read_lines(lexicon) if lexicon else ()
    pats = corpus.read_lines(patterns) if patterns else ()
    entries, dropped = corpus.assemble_corpus(sentences, durations, cfg.corpus.intro_outro_sec,
                                              cfg.corpus.min_clip_sec, names, pats)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus.write_jsonl(entries, out / "corpus.jsonl")
    with open(out / "dropped.jsonl", "w", encoding="utf-8", newline="\n") as f:
        for e, reason in dropped:
            f.write(json.dumps({**e.to_dict(), "reason": reason}, ensure_ascii=False) + "\n")
    if splits:
        corpus.write_splits(corpus.split_by_movie(entries, corpus.read_split_assignment(splits)),
                            out / "splits")
    (out / "stats.json").write_text(_dumps(_stats_payload(entries)), encoding="utf-8")
    return entries, dropped


def cmd_build_corpus(args, cfg):
    sentences = [s for path in args.inputs for s in _read_sentences(path)]
    durations = corpus.read_durations(args.durations)
    missing = sorted({s.movie_id for s in sentences} - set(durations))
    if missing:
        raise InputError(f"no duration for movie(s): {', '.join(missing)}")
    entries, dropped = _write_corpus(sentences, durations, cfg, args.lexicon, args.patterns,
                                     args.splits, args.out_dir)
    log.info("%d entries, %d dropped", len(entries), len(dropped))


def cmd_stats(args, cfg):
    entries = _read_corpus(args.corpus)
    payload = _stats_payload(entries)
    if args.hypotheses:
        hyps = metrics.parse_submission(_read_text(args.hypotheses))
        train = [e.sentence for e in _read_corpus(args.train)] if args.train else []
        payload["description"] = corpus.description_stats(
            [hyps[k] for k in sorted(hyps)], train).to_dict()
    if args.report:
        rows = _read_json(args.report).get("per_sentence")
        if not rows:
            raise InputError(f"{args.report}: no per_sentence scores (run eval --per-sentence)")
        refs = {e.clip_id: e.sentence for e in entries}
        try:
            pairs = [(r["meteor_lite"], refs[r["video_id"]]) for r in rows]
        except KeyError as exc:
            raise InputError(f"{args.report}: unknown clip id {exc}") from exc
        curve = corpus.difficulty_curve([p[0] for p in pairs], [p[1] for p in pairs],
                                        args.sort_key, args.window)
        payload["difficulty_curve"] = {"sort_key": args.sort_key, "window": args.window,
                                       "meteor_lite": curve.tolist()}
    _emit(_dumps(payload), args.out)


def cmd_eval(args, cfg):
    refs = _read_corpus(args.refs)
    report = metrics.evaluate_submission(_read_text(args.submission), refs, args.per_sentence)
    _emit(report.to_json(), args.out)


def cmd_nn_baseline(args, cfg):
    train = {e.clip_id: e.sentence for e in _read_corpus(args.train)}
    train_feats = metrics.read_features(args.train_features)
    unknown = sorted(f.id for f in train_feats if f.id not in train)
    if unknown:
        raise InputError(f"training features without a sentence: {', '.join(unknown[:20])}")
    test_feats = sorted(metrics.read_features(args.test_features), key=lambda f: f.id)
    found = metrics.nn_retrieve(test_feats, train_feats, train)
    _emit(_dumps([{"video_id": r.test_id, "caption": r.sentence, "train_id": r.train_id,
                   "similarity": r.similarity} for r in found]), args.out)


def cmd_upper_bound(args, cfg):
    refs = [e.sentence for e in sorted(_read_corpus(args.refs), key=lambda e: e.clip_id)]
    train = [e.sentence for e in _read_corpus(args.train)]
    score = metrics.retrieval_upper_bound(refs, train, _PAIR_METRICS[args.metric])
    _emit(_dumps({"metric": args.metric, "upper_bound": score, "test_clips": len(refs)}),
          args.out)


def _movie_job(job, cfg):
    """Per-movie stages; runs in a worker process when ``workers > 1``."""
    out = Path(cfg.pipeline.out_dir)
    meta = {"id": job.id}
    duration = job.duration_sec
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        modes = ("auto", "semi") if cfg.pipeline.mode == "both" else (cfg.pipeline.mode,)
        if job.movie_wav and job.ad_wav:
            for mode in modes:
                run = segment.analyze_auto if mode == "auto" else segment.analyze_semi
                res = run(job.movie_wav, job.ad_wav, cfg)
                name = f"{job.id}.{mode}.segments.json" if len(modes) > 1 \
                    else f"{job.id}.segments.json"
                (out / name).write_text(segment.segments_to_json(res.segments), encoding="utf-8")
                meta[mode] = {"offset": res.offset.to_dict(), "threshold": res.threshold,
                              "segments": len(res.segments)}
            if not duration:
                duration = audio.load_wav(job.movie_wav).duration_sec
        kept = []
        if job.script and job.srt:
            kept, dropped = align_script_text(_read_text(job.script), _read_text(job.srt),
                                              job.id, cfg, job.srt)
            (out / f"{job.id}.aligned.json").write_text(textalign.sentences_to_json(kept),
                                                       encoding="utf-8")
            meta["aligned"], meta["unreliable"] = len(kept), len(dropped)
    meta["warnings"] = [f"{w.category.__name__}: {w.message}" for w in caught]
    return kept, duration, meta


def cmd_pipeline(args, cfg):
    if args.out_dir:
        cfg.pipeline.out_dir = args.out_dir
    if cfg.pipeline.mode not in ("auto", "semi", "both"):
        raise InputError(f"pipeline.mode: expected auto, semi or both, got {cfg.pipeline.mode!r}")
    jobs = cfg.pipeline.movies
    if not jobs:
        raise InputError("pipeline.movies: no movies configured")
    ids = [j.id for j in jobs]
    if len(set(ids)) != len(ids):
        raise InputError("pipeline.movies: duplicate movie ids")
    out = Path(cfg.pipeline.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.datetime.now(datetime.timezone.utc)
    if cfg.pipeline.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.pipeline.workers) as pool:
            results = list(pool.map(_movie_job, jobs, [cfg] * len(jobs)))
    else:
        results = [_movie_job(j, cfg) for j in jobs]

    sentences, durations = [], {}
    for (kept, duration, meta), job in zip(results, jobs):
        for w in meta["warnings"]:
            print(f"warning: {job.id}: {w}", file=sys.stderr)
            if args.strict and w.startswith(LowConfidenceWarning.__name__):
                raise ProcessingError(f"{job.id}: {w}")
        if kept and not duration:
            raise InputError(f"{job.id}: duration_sec is needed when no audio is given")
        sentences.extend(kept)
        durations[job.id] = duration
    entries, dropped = _write_corpus(sentences, durations, cfg, cfg.pipeline.lexicon,
                                     cfg.pipeline.patterns, cfg.pipeline.splits, out)
    with open(out / "run.log", "w", encoding="utf-8") as f:
        f.write(f"started {started.isoformat()}\n")
        f.write(f"adcorpus {__version__} python {platform.python_version()}\n")
        f.write(f"argv {' '.join(sys.argv[1:])}\n")
        for _, _, meta in results:
            f.write(json.dumps(meta, sort_keys=True) + "\n")
        f.write(f"corpus {len(entries)} entries, {len(dropped)} dropped\n")
    log.info("wrote %s", out)


def cmd_make_fixture(args, cfg):
    paths = synthetic.write_fixture(args.out_dir, args.seed)
    _emit(_dumps(paths), None)


COMMANDS = {
    "sync": cmd_sync, "isolate": cmd_isolate, "segment": cmd_segment,
    "parse-srt": cmd_parse_srt, "parse-script": cmd_parse_script,
    "align-script": cmd_align_script, "build-corpus": cmd_build_corpus, "stats": cmd_stats,
    "eval": cmd_eval, "nn-baseline": cmd_nn_baseline, "upper-bound": cmd_upper_bound,
    "pipeline": cmd_pipeline, "make-fixture": cmd_make_fixture,
}


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {category.__name__}: {message}", file=sys.stderr)


def run(argv=None) -> int:
    """Execute one command; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    with warnings.catch_warnings():
        warnings.showwarning = _show_warning
        warnings.simplefilter("default")
        if args.strict:
            warnings.simplefilter("error", LowConfidenceWarning)
        try:
            cfg = _config(args)
            COMMANDS[args.command](args, cfg)
        except LowConfidenceWarning as exc:
            print(f"error: low-confidence offset: {exc}", file=sys.stderr)
            return EXIT_PROCESSING
        except ProcessingError as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_PROCESSING
        except (InputError, OSError) as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_INPUT
        except AdCorpusError as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_PROCESSING
    return EXIT_OK


def main():
    sys.exit(run())
