"""Design of stochastic exploration schedules by cumulative-regret bounds."""

__version__ = "0.1.0"
