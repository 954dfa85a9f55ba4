"""Semidefinite-programming bounds on classical capacities of quantum channels."""

__version__ = "0.1.0"
