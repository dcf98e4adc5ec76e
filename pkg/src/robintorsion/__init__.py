"""Robin torsional rigidity: closed forms, thresholds, bounds and a finite-element oracle."""

__version__ = "0.1.0"
