"""Battery thermal management for electric vehicles: plant models, optimal and online cooling control."""

__version__ = "0.1.0"
