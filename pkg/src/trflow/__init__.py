"""trflow: numerics for totally real submanifold geometry and its flows."""

__version__ = "0.1.0"
