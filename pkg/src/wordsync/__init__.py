"""Incremental generative parsing with word-synchronous beam search,
per-word complexity metrics, and epoch-signal regression."""

__version__ = "0.1.0"
