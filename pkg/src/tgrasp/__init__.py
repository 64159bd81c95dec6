"""Target-constrained 6-DOF grasp sampling toolkit."""

__version__ = "0.1.0"
