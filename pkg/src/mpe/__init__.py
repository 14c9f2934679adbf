"""Multiple-premise entailment toolkit: data pipeline, voting baselines, neural models."""

__version__ = "0.1.0"
