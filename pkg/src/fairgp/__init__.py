"""Fair symbolic classification: evolved feature programs with a logistic
head, subgroup-fairness auditing, and Pareto hypervolume comparison."""

from .data import Dataset, GroupSet, SimpleGroup, build_simple_groups, load_csv, train_test_split
from .evolution import METHODS, EvolutionConfig, run

__all__ = [
    "Dataset", "GroupSet", "SimpleGroup", "build_simple_groups", "load_csv",
    "train_test_split", "METHODS", "EvolutionConfig", "run",
]
