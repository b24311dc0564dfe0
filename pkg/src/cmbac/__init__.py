"""Conservative model-based actor-critic on desk-scale environments."""

__version__ = "0.1.0"
