"""cubedeck: tangible-cube interaction engine for space-time-cube charts."""

__version__ = "0.1.0"
