"""gode: bi-level molecular representation learning.

A molecule is both a graph of atoms and a node in a biochemical knowledge
graph. This package trains one encoder per view, aligns them contrastively,
and fine-tunes the joint representation for property prediction.
"""

__version__ = "0.1.0"
