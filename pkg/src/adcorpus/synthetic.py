"""Deterministic synthetic movie/AD material with known narration intervals.

The movie track is stereo AR(1) noise; the AD track is the same soundtrack
plus center-panned narration bursts and a faint independent hiss, delayed by
``offset_sec``. Subtitles, a screenplay, a name lexicon and a pipeline config
are written alongside so every CLI stage has input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .audio import AudioTrack, write_wav

RATE = 16000
DURATION = 17.0
BURSTS = ((2.0, 4.0), (7.0, 8.5), (11.5, 13.5))


@dataclass
class SyntheticPair:
    movie: AudioTrack
    ad: AudioTrack
    bursts: tuple
    offset_samples: int


def _colored(rng, n, pole=0.9):
    x = lfilter([1.0], [1.0, -pole], rng.standard_normal(n))
    return x / x.std()


def _narration(rng, n, rate):
    """Voice-like burst: harmonic stack with slow amplitude wobble, 20 ms fades."""
    t = np.arange(n) / rate
    f0 = rng.uniform(110, 180)
    voice = sum(np.sin(2 * np.pi * f0 * h * t + rng.uniform(0, 2 * np.pi)) / h for h in range(1, 8))
    voice += 0.3 * _colored(rng, n, 0.5)
    wobble = 0.75 + 0.25 * np.sin(2 * np.pi * rng.uniform(2, 4) * t)
    fade = np.minimum(1.0, np.minimum(np.arange(n), np.arange(n)[::-1]) / (0.02 * rate))
    return voice / np.sqrt(np.mean(voice ** 2)) * wobble * fade


def make_pair(seed=0, rate=RATE, duration=DURATION, bursts=BURSTS, offset_sec=0.5,
              narration_level=0.12, background_level=0.08, hiss_db=-60.0, stereo=True,
              with_narration=True) -> SyntheticPair:
    rng = np.random.default_rng(seed)
    n = int(round(duration * rate))
    center = background_level * _colored(rng, n, 0.95)
    side = 0.5 * background_level * _colored(rng, n, 0.8)
    left, right = center + side, center - side
    movie = AudioTrack.from_stereo(left, right, rate) if stereo else \
        AudioTrack.from_mono(center, rate)

    voice = np.zeros(n)
    if with_narration:
        for s, e in bursts:
            i, j = int(round(s * rate)), int(round(e * rate))
            voice[i:j] = narration_level * _narration(rng, j - i, rate)
    hiss = 10 ** (hiss_db / 20) * rng.standard_normal((2, n))
    chans = movie.samples + voice + hiss[:movie.channels]
    k = int(round(offset_sec * rate))
    delayed = np.zeros_like(chans)
    delayed[:, k:] = chans[:, :n - k]
    return SyntheticPair(movie, AudioTrack(delayed, rate), tuple(bursts), k)


SRT = """\
1
00:00:00,500 --> 00:00:01,800
<i>Where are you going?</i>

2
00:00:04,200 --> 00:00:05,600
I told you, to the harbor.

3
00:00:05,700 --> 00:00:06,900
Nobody goes there at night.

4
00:00:08,600 --> 00:00:10,000
Then we will be the first.

5
00:00:10,100 --> 00:00:11,300
[THUNDER RUMBLES]

6
00:00:13,600 --> 00:00:15,200
Keep your voice down, Anna.
"""

SCRIPT = """\
INT. KITCHEN - NIGHT

Rain hammers the windows. Anna pulls on her coat.

                         TOM
               Where are you going?

Anna grabs the keys from the table.

                         ANNA
               I told you. To the harbor.

                         TOM
               Nobody goes there at night.

Tom and Anna stare at each other. She opens the door.

                         ANNA
               Then we will be the first.

CUT TO:

EXT. HARBOR - CONTINUOUS

Waves crash against the pier. Anna, Tom and Mia run along the dock.

                         TOM
                    (whispering)
               Keep your voice down, Anna.

Anna kneels beside a rope.
"""


def write_fixture(out_dir, seed=0) -> dict:
    """Write the full synthetic fixture set into ``out_dir``; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pair = make_pair(seed)
    paths = {
        "movie_wav": out / "movie.wav",
        "ad_wav": out / "ad.wav",
        "srt": out / "movie.srt",
        "script": out / "movie_script.txt",
        "lexicon": out / "names.txt",
        "patterns": out / "drop_patterns.txt",
        "splits": out / "splits.csv",
        "truth": out / "truth.json",
        "config": out / "pipeline.toml",
    }
    write_wav(pair.movie, paths["movie_wav"], 16)
    write_wav(pair.ad, paths["ad_wav"], 16)
    paths["srt"].write_text(SRT, encoding="utf-8")
    paths["script"].write_text(SCRIPT, encoding="utf-8")
    paths["lexicon"].write_text("Anna\nTom\nMia\n", encoding="utf-8")
    paths["patterns"].write_text("(?i)^subtitles?\\b\n", encoding="utf-8")
    paths["splits"].write_text("movie_id,split\nsynth01,train\n", encoding="utf-8")
    paths["truth"].write_text(json.dumps({
        "bursts": [list(b) for b in pair.bursts],
        "offset_samples": pair.offset_samples,
        "sample_rate": RATE,
    }, indent=1) + "\n", encoding="utf-8")
    paths["config"].write_text("""\
[corpus]
intro_outro_sec = 1.0

[pipeline]
out_dir = "out"
mode = "both"
lexicon = "names.txt"
patterns = "drop_patterns.txt"
splits = "splits.csv"

[[pipeline.movies]]
id = "synth01"
movie_wav = "movie.wav"
ad_wav = "ad.wav"
srt = "movie.srt"
script = "movie_script.txt"
""", encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}
