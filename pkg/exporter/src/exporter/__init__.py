"""Embedding exporter: tokenize corpus objects with a pretrained
transformer tokenizer, run the frozen encoder, and write final-layer
per-token embeddings in the TGBE store format consumed by the
recommendation engine."""

__version__ = "0.1.0"
