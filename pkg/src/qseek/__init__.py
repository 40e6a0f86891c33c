"""Weakly-supervised alignment of questionnaire questions to audio interview
segments: trainable speech head, Gaussian-weighted question anchors,
contrastive training with in-audio negatives, fixed-window retrieval with
R@k evaluation, and an indexable query service."""

__version__ = "0.1.0"
