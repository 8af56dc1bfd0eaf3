"""Annulus eigenvalue crossings, first-order bifurcated domains and the
stationary Euler flows and Pompeiu-type identities built from them."""

__version__ = "0.1.0"
