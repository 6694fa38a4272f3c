"""Discrete-event Fog network simulator with a pluggable service-selection layer."""

__version__ = "0.1.0"
