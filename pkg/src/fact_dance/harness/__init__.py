"""Datasets, training loops, checkpoints and ablations built on the core modules."""
