"""Static detection of Python performance anti-patterns and prediction of
performance-bug-injecting commits from repository history."""

__version__ = "0.1.0"
