"""Qubit battery charged by a bosonic mode through one- and two-photon exchange."""

__version__ = "0.1.0"
