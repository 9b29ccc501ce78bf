"""National-anthem MIDI features versus global country indices."""

__version__ = "1.0.0"
