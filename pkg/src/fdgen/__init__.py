"""Einstein-notation finite-difference solver generator."""

__version__ = "0.1.0"
