"""Simulation of blind-polarization-basis QKD and impersonation attacks on it."""

from .harness import SimConfig, SimReport, enumerate_exhaustive, run, run_round

__all__ = ["SimConfig", "SimReport", "enumerate_exhaustive", "run", "run_round"]
__version__ = "0.1.0"
