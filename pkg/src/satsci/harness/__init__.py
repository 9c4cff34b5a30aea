"""Synthetic scenes, metrics, experiment sweeps and file formats."""
