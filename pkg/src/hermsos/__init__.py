"""Hermitian sums of squares on projective space: forms, chart series, certificates and integral operators."""

__version__ = "0.1.0"
