"""Small input checks shared by the estimators."""
import math
import numbers

import numpy as np
from sklearn.utils.validation import check_array


def check_alpha(alpha, name="alpha", closed_right=False):
    if not isinstance(alpha, numbers.Real) or not math.isfinite(alpha):
        raise ValueError(f"{name} must be a finite real, got {alpha!r}")
    ok = 0.0 < alpha <= 1.0 if closed_right else 0.0 < alpha < 1.0
    if not ok:
        bound = "(0, 1]" if closed_right else "(0, 1)"
        raise ValueError(f"{name} must be in {bound}, got {alpha}")
    return float(alpha)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_design(X, n_features=None, name="X"):
    """2-D float array of candidate feature vectors, one per row."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, input_name=name)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(
            f"{name} has {X.shape[1]} features, but this estimator expects {n_features}"
        )
    return X


def check_random_state_seed(seed):
    """A numpy Generator from an int seed, a SeedSequence, or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
