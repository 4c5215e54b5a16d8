"""Clique-matrix graph decomposition and zero-constrained covariance fitting."""
