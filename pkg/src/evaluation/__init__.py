"""Confusion counts, detection metrics, timing and the experiment matrix."""
