"""Safe reinforcement learning with SOS-synthesized control barrier filters."""

__version__ = "0.1.0"
