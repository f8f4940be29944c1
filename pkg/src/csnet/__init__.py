"""Compressed-sensing toolkit for communications-network workloads."""

__version__ = "0.1.0"

from . import core, solvers, matcomp, wsn, netmon, tmc, physim  # noqa: F401
