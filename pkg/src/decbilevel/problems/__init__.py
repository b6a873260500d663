"""Bilevel problem oracles and datasets."""

from decbilevel.problems.base import BilevelOracle, ExactOracle, ProblemConstants
from decbilevel.problems.datasets import (
    Dataset,
    dump_csv,
    load_libsvm,
    make_synthetic_dataset,
)
from decbilevel.problems.logistic import logistic_hyperopt_problem
from decbilevel.problems.quadratic import quadratic_from_data, quadratic_problem

__all__ = [
    "BilevelOracle",
    "ExactOracle",
    "ProblemConstants",
    "quadratic_problem",
    "quadratic_from_data",
    "logistic_hyperopt_problem",
    "Dataset",
    "make_synthetic_dataset",
    "load_libsvm",
    "dump_csv",
]
