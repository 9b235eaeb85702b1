"""Grounded question answering over manufacturing machine-safety documents,
with a full-factorial retrieval/model/top-k evaluation bench."""

__version__ = "0.1.0"
