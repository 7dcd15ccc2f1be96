"""Recursive estimation of an upper quantile of a drifting score stream.

The estimate moves on a faster time scale than the information matrix:
its step size decays like ``k^-q`` with ``q < 1``, scaled by the inverse
of a running kernel estimate of the score density at the current
quantile.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_alpha

# guards ceil/floor of products such as (1 - 0.1) * 10 against rounding
_INDEX_EPS = 1e-9


@dataclass(frozen=True)
class QuantileConfig:
    """Schedule of the recursion.

    alpha : upper tail mass; the target is the (1 - alpha)-quantile.
    q_exp : step exponent, in (1/2, 1].  ``q_exp = 1`` gives the classical
        single-time-scale schedule.
    gamma : bandwidth/step-cap exponent, with ``q_exp - gamma > 1/2``.
    beta_floor : lower bound on the step multiplier (0 disables it).
    h_floor : relative floor on the initial bandwidth; the absolute floor
        is ``h_floor * max(1, |C|)``.
    """

    alpha: float
    q_exp: float = 5 / 8
    gamma: float = 1 / 10
    beta_floor: float = 0.0
    h_floor: float = 1e-9

    def __post_init__(self):
        check_alpha(self.alpha)
        if not 0.5 < self.q_exp <= 1.0:
            raise ValueError(f"q_exp must be in (1/2, 1], got {self.q_exp}")
        if not 0.0 < self.gamma < self.q_exp - 0.5:
            raise ValueError(
                f"gamma must be in (0, q_exp - 1/2) = (0, {self.q_exp - 0.5}), got {self.gamma}"
            )
        if self.beta_floor < 0:
            raise ValueError("beta_floor must be >= 0")
        if not self.h_floor > 0:
            raise ValueError("h_floor must be > 0")


@dataclass
class QuantileState:
    c_hat: float
    f_hat: float
    beta0: float
    h_base: float
    k: int

    def copy(self):
        return copy.copy(self)


def _ceil(x):
    return int(math.ceil(x - _INDEX_EPS))


def _floor(x):
    return int(math.floor(x + _INDEX_EPS))


def init_indices(alpha, k0):
    """1-based order-statistic indices ``(i_C, k0_plus, k0_minus)``."""
    i_c = max(_ceil((1.0 - alpha) * k0), 1)
    k_plus = _ceil((1.0 - alpha / 2.0) * k0)
    k_minus = max(_floor((1.0 - 1.5 * alpha) * k0), 1)
    return i_c, k_plus, k_minus


def init_from_sample(cfg, scores, k0=None):
    """Initial quantile, density and schedule constants from ``k0`` scores."""
    z = np.sort(np.asarray(scores, dtype=float).ravel())
    k0 = z.size if k0 is None else int(k0)
    if k0 != z.size:
        raise ValueError(f"expected {k0} scores, got {z.size}")
    if k0 < 2:
        raise ValueError("need at least two scores to initialize")
    if not np.all(np.isfinite(z)):
        raise ValueError("initial scores must be finite")
    i_c, k_plus, k_minus = init_indices(cfg.alpha, k0)
    c_hat = float(z[i_c - 1])
    # k0_plus == k0_minus only happens for tiny k0; avoid the zero division
    beta0 = k0 / max(k_plus - k_minus, 1)
    h = float(z[k_plus - 1] - z[k_minus - 1])
    h = max(h, cfg.h_floor * max(1.0, abs(c_hat)))
    h_k0 = h / k0 ** cfg.gamma
    f_hat = float(np.count_nonzero(np.abs(z - c_hat) <= h_k0)) / (2.0 * k0 * h_k0)
    return QuantileState(c_hat=c_hat, f_hat=f_hat, beta0=beta0, h_base=h, k=k0)


def beta(state, cfg, k=None):
    """Step multiplier ``max(eps2, min(1/f, beta0 k^gamma))``."""
    k = state.k if k is None else k
    if k < 1:
        raise ValueError("k must be >= 1")
    cap = state.beta0 * k ** cfg.gamma
    b = cap if state.f_hat <= 0.0 else min(1.0 / state.f_hat, cap)
    return max(cfg.beta_floor, b)


def step(state, cfg, z, alpha=None):
    """Advance the recursion by one raw score ``z``, in place.

    ``alpha`` overrides ``cfg.alpha`` (adaptive targets).  The indicator of
    both updates uses the estimate from *before* this step.
    """
    if not math.isfinite(z):
        raise ValueError(f"score must be finite, got {z}")
    a = cfg.alpha if alpha is None else alpha
    k = state.k
    c = state.c_hat
    b = beta(state, cfg, k) if k >= 1 else state.beta0
    k1 = k + 1
    state.c_hat = c + b / k1 ** cfg.q_exp * ((1.0 if z >= c else 0.0) - a)
    h1 = state.h_base / k1 ** cfg.gamma
    hit = 1.0 if abs(z - c) <= h1 else 0.0
    state.f_hat += (hit / (2.0 * h1) - state.f_hat) / k1 ** cfg.q_exp
    state.k = k1
    return state


class RecursiveQuantile(BaseEstimator):
    """Streaming (1 - alpha)-quantile estimator with scikit-learn conventions.

    The first ``k0`` values initialize the recursion; later values are
    consumed one at a time.  Memory use is constant.

    Attributes
    ----------
    quantile_ : float
        Current estimate.
    density_ : float
        Current kernel estimate of the density at ``quantile_``.
    n_seen_ : int
    """

    def __init__(self, alpha=0.1, q_exp=5 / 8, gamma=1 / 10, k0=50, beta_floor=0.0):
        self.alpha = alpha
        self.q_exp = q_exp
        self.gamma = gamma
        self.k0 = k0
        self.beta_floor = beta_floor

    def _config(self):
        return QuantileConfig(
            alpha=self.alpha, q_exp=self.q_exp, gamma=self.gamma, beta_floor=self.beta_floor
        )

    def fit(self, z, y=None):
        for attr in ("state_", "_buffer", "cfg_"):
            self.__dict__.pop(attr, None)
        return self.partial_fit(z)

    def partial_fit(self, z, y=None):
        z = np.asarray(z, dtype=float).ravel()
        if not hasattr(self, "cfg_"):
            self.cfg_ = self._config()
        if not hasattr(self, "state_"):
            buf = getattr(self, "_buffer", np.empty(0))
            need = self.k0 - buf.size
            buf = np.concatenate([buf, z[:need]])
            z = z[need:]
            if buf.size < self.k0:
                self._buffer = buf
                return self
            self.state_ = init_from_sample(self.cfg_, buf, self.k0)
            self.__dict__.pop("_buffer", None)
        st, cfg = self.state_, self.cfg_
        for v in z.tolist():
            step(st, cfg, v)
        return self

    @property
    def quantile_(self):
        return self.state_.c_hat

    @property
    def density_(self):
        return self.state_.f_hat

    @property
    def n_seen_(self):
        return self.state_.k
