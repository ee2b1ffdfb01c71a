"""Cooperative multi-agent search-and-track of moving targets with tile-coded Q-learning."""

__version__ = "0.1.0"
