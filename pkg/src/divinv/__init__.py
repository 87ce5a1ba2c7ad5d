"""Inversion of total divergences with partial Euler operators."""
