"""Refined extreme-value plus normal approximation for sums of heavy-tailed variables."""
