"""Finite-dimensional approximation of L2-invariants."""
