"""Tools for building an audio-description movie corpus: soundtrack
alignment and narration segmentation, script-to-subtitle alignment,
corpus transforms and caption metrics."""

__version__ = "0.1.0"
