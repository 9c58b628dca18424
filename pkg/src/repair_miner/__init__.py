"""Mining AST-level change actions and analysing repair search-space navigation."""

__version__ = "0.1.0"
