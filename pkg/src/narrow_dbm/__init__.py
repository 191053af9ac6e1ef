"""Narrow deep Boltzmann machines: exact inference, bounds and a constructive compiler."""

from . import bounds, compiler, core, inference, model
from .core import Distribution, StateSpace, SupportSet, kl_divergence, total_variation
from .errors import DbmError
from .model import DbmParams, FeedforwardLayer

__all__ = [
    "DbmError",
    "DbmParams",
    "Distribution",
    "FeedforwardLayer",
    "StateSpace",
    "SupportSet",
    "bounds",
    "compiler",
    "core",
    "inference",
    "kl_divergence",
    "model",
    "total_variation",
]
__version__ = "0.1.0"
