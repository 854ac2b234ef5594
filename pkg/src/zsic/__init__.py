"""Zero-shot intent classification with mixture attention and episodic meta-learning."""

__version__ = "0.1.0"
