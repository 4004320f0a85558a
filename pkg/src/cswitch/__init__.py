"""Toolkit for code-switched speech recognition downstream of the acoustic
model: corpus handling, implicit language-ID text encodings, n-gram language
models, CTC decoding with shallow fusion, frame-level language-ID metrics,
and WER evaluation."""

__version__ = "0.1.0"
