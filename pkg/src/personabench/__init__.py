"""Personalization benchmark: simulated users with divergent vocabularies,
private sentiment models, ensembles, and an alpha-weighted personalization score."""
__version__ = "0.1.0"

from .metric import (AlphaCutoff, Orientation, PerfPair, Preference, breakeven_alpha,
                     personalization_score, preferred)
from .rng import Rng
