"""Evolving brainless voxel robots whose shape change drives adaptive locomotion."""
