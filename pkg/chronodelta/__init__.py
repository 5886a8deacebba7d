"""Schrödinger evolution on the line with a time-dependent delta coupling at the origin."""
