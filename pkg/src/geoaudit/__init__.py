"""A-priori shortcut auditing for tabular classifiers."""

__version__ = "0.1.0"
