"""Boundary-distance estimation and tubular-neighbourhood robustness certificates."""
