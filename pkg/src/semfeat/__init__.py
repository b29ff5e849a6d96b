"""Semantic-featuring workbench for binary text classification.

Teachers author dictionaries of n-gram terms, train per-dictionary context
models that turn literal matches into context-based "smooth" matches, and
drive an interactive label/feature loop against Bag-of-Words baselines.
"""

__version__ = "0.1.0"
