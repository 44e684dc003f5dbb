"""Multi-label tag recommendation: a convolutional head trained over
frozen token embeddings, threshold-gated top-K recommendation, and a
Recall/Precision/F1@K evaluation harness."""

__version__ = "0.1.0"
