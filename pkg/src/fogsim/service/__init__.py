"""HTTP service wrapping the simulator: topology builders, one-shot selection
decisions, simulation runs, and background experiment sweeps."""

from .app import create_app

__all__ = ["create_app"]
