"""Secure one-way computation of randomized functions over finite alphabets."""

__version__ = "0.1.0"
