"""Run configuration: a TOML file with one table per module.

Every key is optional; an empty file yields the defaults below. Unknown
sections or keys are rejected with ``BadConfig`` naming the dotted key path.

    [audio]    frame_sec = 0.05, hop_sec = 0.025
    [sync]     max_lag_sec = 5.0, low_confidence_ratio = 1.2
    [isolate]  taps = 64, mu = 0.5, eps = 1e-6, side_gain = 0.0, bidirectional = true
    [segment]  threshold_quantile = 0.5, threshold_factor = 3.0, floor_db = -40.0,
               min_seg_sec = 1.0, min_gap_sec = 0.5, pad_end_sec = 2.0
    [align]    gap_penalty = 0.1, min_score = 0.5, edge_span_sec = 5.0
    [corpus]   intro_outro_sec = 90.0, min_clip_sec = 2.0
    [pipeline] out_dir = "out", mode = "auto", workers = 1,
               lexicon = "", patterns = "", splits = ""
    [[pipeline.movies]] id, movie_wav, ad_wav, srt, script, duration_sec
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import BadConfig


@dataclass
class AudioConfig:
    frame_sec: float = 0.05
    hop_sec: float = 0.025


@dataclass
class SyncConfig:
    max_lag_sec: float = 5.0
    low_confidence_ratio: float = 1.2


@dataclass
class IsolateConfig:
    taps: int = 64
    mu: float = 0.5
    eps: float = 1e-6
    side_gain: float = 0.0
    bidirectional: bool = True


@dataclass
class SegmentConfig:
    threshold_quantile: float = 0.5
    threshold_factor: float = 3.0
    floor_db: float = -40.0
    min_seg_sec: float = 1.0
    min_gap_sec: float = 0.5
    pad_end_sec: float = 2.0


@dataclass
class AlignConfig:
    gap_penalty: float = 0.1
    min_score: float = 0.5
    edge_span_sec: float = 5.0


@dataclass
class CorpusConfig:
    intro_outro_sec: float = 90.0
    min_clip_sec: float = 2.0


@dataclass
class MovieJob:
    id: str
    movie_wav: str = ""
    ad_wav: str = ""
    srt: str = ""
    script: str = ""
    duration_sec: float = 0.0


@dataclass
class PipelineConfig:
    out_dir: str = "out"
    mode: str = "auto"
    workers: int = 1
    lexicon: str = ""
    patterns: str = ""
    splits: str = ""
    movies: list = field(default_factory=list)


@dataclass
class Config:
    audio: AudioConfig = field(default_factory=AudioConfig)
    sync: SyncConfig = field(default_factory=SyncConfig)
    isolate: IsolateConfig = field(default_factory=IsolateConfig)
    segment: SegmentConfig = field(default_factory=SegmentConfig)
    align: AlignConfig = field(default_factory=AlignConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def set(self, dotted_key, value):
        """Assign one ``section.key`` with type checking."""
        section, _, key = dotted_key.partition(".")
        if not key or section == "pipeline" and key == "movies":
            raise BadConfig(dotted_key)
        obj = getattr(self, section, None)
        if obj is None or not dataclasses.is_dataclass(obj):
            raise BadConfig(dotted_key)
        _assign(obj, key, value, dotted_key)


SCALAR_KEYS = [f"{s.name}.{f.name}"
               for s in dataclasses.fields(Config)
               for f in dataclasses.fields(s.default_factory())
               if f.name != "movies"]


def _coerce(value, typ, path):
    if typ in ("float", float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise BadConfig(path, f"expected a number, got {value!r}")
        return float(value)
    if typ in ("bool", bool):
        if not isinstance(value, bool):
            raise BadConfig(path, f"expected true/false, got {value!r}")
        return value
    if typ in ("int", int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise BadConfig(path, f"expected an integer, got {value!r}")
        return value
    if typ in ("str", str):
        if not isinstance(value, str):
            raise BadConfig(path, f"expected a string, got {value!r}")
        return value
    raise BadConfig(path, "unsupported type")


def _assign(obj, key, value, path):
    types = {f.name: f.type for f in dataclasses.fields(obj)}
    if key not in types:
        raise BadConfig(path)
    setattr(obj, key, _coerce(value, types[key], path))


def _parse_movies(items, base: Path):
    if not isinstance(items, list):
        raise BadConfig("pipeline.movies", "expected an array of tables")
    jobs = []
    for i, item in enumerate(items):
        path = f"pipeline.movies[{i}]"
        if not isinstance(item, dict) or "id" not in item:
            raise BadConfig(path, "each movie needs an 'id'")
        job = MovieJob(id=_coerce(item["id"], str, f"{path}.id"))
        for k, v in item.items():
            if k != "id":
                _assign(job, k, v, f"{path}.{k}")
        for k in ("movie_wav", "ad_wav", "srt", "script"):
            v = getattr(job, k)
            if v and not Path(v).is_absolute():
                setattr(job, k, str(base / v))
        jobs.append(job)
    return jobs


def config_from_dict(data, base_dir=".") -> Config:
    cfg = Config()
    base = Path(base_dir)
    for section, table in data.items():
        if not isinstance(table, dict) or not hasattr(cfg, section):
            raise BadConfig(section, "unknown section")
        for key, value in table.items():
            path = f"{section}.{key}"
            if section == "pipeline" and key == "movies":
                cfg.pipeline.movies = _parse_movies(value, base)
            else:
                _assign(getattr(cfg, section), key, value, path)
    if cfg.pipeline.out_dir and not Path(cfg.pipeline.out_dir).is_absolute():
        cfg.pipeline.out_dir = str(base / cfg.pipeline.out_dir)
    for key in ("lexicon", "patterns", "splits"):
        v = getattr(cfg.pipeline, key)
        if v and not Path(v).is_absolute():
            setattr(cfg.pipeline, key, str(base / v))
    return cfg


def load_config(path) -> Config:
    """Parse a TOML config file; relative paths inside resolve against its directory."""
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise BadConfig(str(path), f"invalid TOML: {exc}") from exc
    return config_from_dict(data, path.parent)
