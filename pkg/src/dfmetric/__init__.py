"""Metric-learning deepfake detection toolkit: triplet mining, losses, training and video-level evaluation."""

__version__ = "0.1.0"
