"""Streaming selection of informative design points."""
from .criteria import CriterionSpec, ElementaryInfo, InfoState
from .quantile import RecursiveQuantile
from .thinner import SequentialThinner, Thinner, ThinnerConfig

__version__ = "0.1.0"
