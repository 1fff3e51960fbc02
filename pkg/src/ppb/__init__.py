"""Photon-pair counting toolkit: biphoton theory, event simulation and TCSPC analysis."""

__version__ = "0.1.0"
