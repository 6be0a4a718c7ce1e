"""Poisoning lab for Siamese-style verification heads on identity embeddings.

Builds balanced genuine/impostor pair batches over synthetic or imported
embedding populations, injects master-face poisoned pairs at a chosen
fraction, trains the absolute-difference decision head, and measures benign
accuracy alongside single- and multi-query impersonation success rates.
"""

__version__ = "0.1.0"
