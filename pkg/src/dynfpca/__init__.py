"""Dynamic functional principal component analysis for functional time series."""

__version__ = "0.1.0"
