"""Closed vocabularies used by configuration, services and the CLI."""

from enum import Enum


class ModelKind(str, Enum):
    """Bag classifiers. Only these can be trained or served."""

    WIKG = "wikg"
    MEAN = "mean"
    MAX = "max"
    ABMIL = "abmil"

    @property
    def is_baseline(self) -> bool:
        return self is not ModelKind.WIKG


class EdgePolicy(str, Enum):
    """How neighbors of each node are chosen."""

    WIKG = "wikg"
    KNN_COS = "knn-cos"
    KNN_DIST = "knn-dist"


class Readout(str, Enum):
    MEAN = "mean"
    MAX = "max"


class Mode(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


class Precision(str, Enum):
    FLOAT32 = "float32"
    FLOAT64 = "float64"


class ClassifierInit(str, Enum):
    XAVIER = "xavier"
    ZERO = "zero"


class CheckpointSelection(str, Enum):
    """Which bags pick the best-validation-AUC checkpoint."""

    HELD_OUT_FOLD = "held-out fold"
    INNER_SPLIT = "inner split of the training folds"
