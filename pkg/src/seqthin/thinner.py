"""Online thinning of a candidate stream.

Each candidate is scored by the directional derivative of the criterion
at the current information matrix and kept when the score reaches a
recursively estimated (1 - alpha)-quantile of past scores.  The matrix
moves on the slow time scale (step 1/n_k), the quantile on the fast one.

The :class:`Thinner` state machine processes one candidate at a time;
:class:`SequentialThinner` wraps it as a scikit-learn estimator.
"""
from __future__ import annotations

import copy
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import quantile as qt
from ._validation import check_alpha, check_design, check_positive_int
from .criteria import (
    CriterionKind,
    CriterionSpec,
    ElementaryInfo,
    InfoState,
    SingularMatrixError,
    dir_derivative,
    phi,
)


class Mode(str, enum.Enum):
    FIXED = "fixed"
    FORCE = "force"
    ADAPTIVE = "adaptive"
    REPLAY = "replay"


class Forced(str, enum.Enum):
    NONE = "none"
    INITIAL = "initial"
    EPS1 = "eps1"
    QUOTA_SELECT = "quota_select"
    QUOTA_REJECT = "quota_reject"


class Phase(str, enum.Enum):
    COLLECTING = "collecting"
    RUNNING = "running"


class HorizonExceededError(RuntimeError):
    """A quota-mode thinner was fed more candidates than its horizon."""


@dataclass(frozen=True)
class ThinnerConfig:
    """Settings of one thinning run.

    In the quota modes (``FORCE``, ``ADAPTIVE``, ``REPLAY``) exactly
    ``n_target`` of ``horizon`` candidates are kept; ``alpha`` then
    defaults to ``n_target / horizon``.  ``REPLAY`` needs the frozen
    matrix and threshold of an earlier run and does not learn.
    """

    criterion: CriterionSpec
    alpha: float | None = None
    mode: Mode = Mode.FIXED
    n_target: int | None = None
    horizon: int | None = None
    k0: int | None = None
    eps1: float = 0.0
    q_exp: float = 5 / 8
    gamma: float = 1 / 10
    beta_floor: float = 0.0
    refresh_period: int = 1024
    frozen_matrix: np.ndarray | None = field(default=None, compare=False)
    frozen_threshold: float | None = None

    def __post_init__(self):
        mode = Mode(self.mode)
        object.__setattr__(self, "mode", mode)
        p = self.criterion.dim
        if mode is not Mode.FIXED:
            if self.n_target is None or self.horizon is None:
                raise ValueError(f"mode {mode.value!r} needs n_target and horizon")
            check_positive_int(self.n_target, "n_target")
            check_positive_int(self.horizon, "horizon")
            if self.n_target > self.horizon:
                raise ValueError("n_target cannot exceed horizon")
            if self.alpha is None:
                object.__setattr__(self, "alpha", self.n_target / self.horizon)
        if self.alpha is None:
            raise ValueError("alpha is required in fixed mode")
        check_alpha(self.alpha, closed_right=mode is not Mode.FIXED)
        k0 = 5 * p if self.k0 is None else self.k0
        check_positive_int(k0, "k0", minimum=max(p, 2))
        object.__setattr__(self, "k0", k0)
        if mode in (Mode.FORCE, Mode.ADAPTIVE) and self.n_target < k0:
            raise ValueError(f"n_target={self.n_target} is smaller than k0={k0}")
        if not 0.0 <= self.eps1 < self.alpha:
            raise ValueError(f"eps1 must be in [0, alpha), got {self.eps1}")
        if mode is Mode.REPLAY:
            if self.frozen_matrix is None or self.frozen_threshold is None:
                raise ValueError("replay mode needs frozen_matrix and frozen_threshold")
            fm = np.asarray(self.frozen_matrix, dtype=float)
            if fm.shape != (p, p):
                raise ValueError("frozen_matrix has the wrong shape")
            object.__setattr__(self, "frozen_matrix", fm)
        self.quantile_config()

    def quantile_config(self):
        # alpha == 1 is legal for quotas but the recursion needs (0, 1)
        a = min(self.alpha, 1.0 - 1e-12)
        return qt.QuantileConfig(
            alpha=a, q_exp=self.q_exp, gamma=self.gamma, beta_floor=self.beta_floor
        )


@dataclass(frozen=True)
class Decision:
    """Outcome for one candidate.

    ``k`` counts candidates seen including this one; ``score`` is the raw
    directional derivative even when forcing overrode it (NaN while the
    initial sample is collected).
    """

    k: int
    selected: bool
    score: float
    threshold: float
    forced: Forced
    phi_after: float
    n_selected: int


def _as_info(x, dim):
    if isinstance(x, ElementaryInfo):
        info = x
    else:
        info = ElementaryInfo.rank_one(x)
    if info.dim != dim:
        raise ValueError(f"candidate has dimension {info.dim}, expected {dim}")
    return info


class Thinner:
    """Sequential selection state machine.

    Feed candidates with :meth:`observe`; each call returns a
    :class:`Decision`.  The state can be copied with :meth:`copy` and
    replayed independently.
    """

    def __init__(self, cfg: ThinnerConfig):
        self.cfg = cfg
        self.spec = cfg.criterion
        self.qcfg = cfg.quantile_config()
        p = self.spec.dim
        self.info = InfoState.empty(
            p, refresh_period=cfg.refresh_period, track_inverse=self.spec.tracks_inverse
        )
        self.quant: qt.QuantileState | None = None
        self.k = 0
        self.n = 0
        self._phi = -math.inf
        self._initial: list[ElementaryInfo] = []
        if cfg.mode is Mode.REPLAY:
            self.phase = Phase.RUNNING
            self.frozen = InfoState.from_matrix(
                cfg.frozen_matrix, count=1, track_inverse=self.spec.tracks_inverse
            )
            if not self.frozen.inv_valid:
                raise SingularMatrixError("frozen matrix is singular")
        else:
            self.phase = Phase.COLLECTING
            self.frozen = None

    def copy(self):
        return copy.deepcopy(self)

    @property
    def threshold(self):
        if self.cfg.mode is Mode.REPLAY:
            return float(self.cfg.frozen_threshold)
        return self.quant.c_hat if self.quant is not None else math.nan

    @property
    def phi(self):
        return self._phi

    @property
    def done(self):
        return self.cfg.horizon is not None and self.k >= self.cfg.horizon

    def _current_phi(self):
        if self.info.count < self.spec.dim:
            return -math.inf
        if self.spec.kind is CriterionKind.LOGDET and self.info.inv_valid:
            return self.info.logdet
        return phi(self.spec, self.info.m)

    def _score(self, info_state, e):
        if (
            e.is_rank_one
            and self.spec.kind is CriterionKind.LOGDET
            and info_state.inv_valid
        ):
            f = e.f
            return e.weight * float(f @ info_state.m_inv @ f) - self.spec.dim
        return dir_derivative(self.spec, info_state, e)

    def _quota(self):
        """Quota override for the next candidate, or None."""
        cfg = self.cfg
        if cfg.horizon is None:
            return None
        if self.k >= cfg.horizon:
            raise HorizonExceededError(
                f"horizon N={cfg.horizon} reached; no more candidates accepted"
            )
        if cfg.mode is Mode.FIXED:
            return None
        if self.n >= cfg.n_target:
            return Forced.QUOTA_REJECT
        if cfg.n_target - self.n >= cfg.horizon - self.k:
            return Forced.QUOTA_SELECT
        return None

    def observe(self, x):
        """Process one candidate (feature vector or :class:`ElementaryInfo`)."""
        e = _as_info(x, self.spec.dim)
        if self.phase is Phase.COLLECTING:
            return self._collect(e)
        if self.cfg.mode is Mode.REPLAY:
            return self._replay_step(e)
        return self._running_step(e)

    def _select(self, e):
        self.info.update(e)
        self.n += 1
        self._phi = self._current_phi()

    def _collect(self, e):
        quota = self._quota()
        if quota is Forced.QUOTA_REJECT:
            raise SingularMatrixError(
                "quota exhausted while the initial information matrix is still singular"
            )
        self._initial.append(e)
        self.k += 1
        self._select(e)
        if self.k >= self.cfg.k0 and self.info.inv_valid:
            self._start()
        return Decision(
            k=self.k,
            selected=True,
            score=math.nan,
            threshold=math.nan,
            forced=Forced.INITIAL,
            phi_after=self._phi,
            n_selected=self.n,
        )

    def _start(self):
        scores = np.array([self._score(self.info, e) for e in self._initial])
        self.quant = qt.init_from_sample(self.qcfg, scores, self.k)
        self._initial = []
        self.phase = Phase.RUNNING

    def _running_step(self, e):
        cfg = self.cfg
        s = self._score(self.info, e)
        c = self.quant.c_hat
        forced = self._quota()
        if forced is None and cfg.eps1 > 0.0 and self.n <= cfg.eps1 * self.k:
            forced = Forced.EPS1
        if forced is None:
            selected = s >= c
            forced = Forced.NONE
        else:
            selected = forced is not Forced.QUOTA_REJECT
        alpha_k = None
        if cfg.mode is Mode.ADAPTIVE:
            alpha_k = (cfg.n_target - self.n) / (cfg.horizon - self.k)
            alpha_k = min(max(alpha_k, 0.0), 1.0)
        if selected:
            self._select(e)
        qt.step(self.quant, self.qcfg, s, alpha=alpha_k)
        self.k += 1
        return Decision(
            k=self.k,
            selected=bool(selected),
            score=s,
            threshold=c,
            forced=forced,
            phi_after=self._phi,
            n_selected=self.n,
        )

    def _replay_step(self, e):
        s = self._score(self.frozen, e)
        c = float(self.cfg.frozen_threshold)
        forced = self._quota()
        if forced is None:
            selected = s > c
            forced = Forced.NONE
        else:
            selected = forced is not Forced.QUOTA_REJECT
        if selected:
            self._select(e)
        self.k += 1
        return Decision(
            k=self.k,
            selected=bool(selected),
            score=s,
            threshold=c,
            forced=forced,
            phi_after=self._phi,
            n_selected=self.n,
        )


def new_thinner(cfg):
    """Fresh thinner in the collecting phase (or running, for replay)."""
    return Thinner(cfg)


def observe(state, x):
    """Functional form: returns ``(new_state, decision)``; ``state`` is untouched."""
    new = state.copy()
    return new, new.observe(x)


def run_replay(cfg, X, m=1, permute=True, seed=None):
    """Learn a frozen matrix and threshold from ``m`` passes over ``X``.

    Runs the fixed-alpha thinner over ``X`` followed by ``m - 1`` further
    copies (randomly permuted when ``permute``).  Returns the final
    information matrix and quantile estimate.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("replay needs a non-empty 2-D dataset")
    check_positive_int(m, "m")
    fixed = ThinnerConfig(
        criterion=cfg.criterion,
        alpha=cfg.alpha,
        k0=cfg.k0,
        eps1=cfg.eps1,
        q_exp=cfg.q_exp,
        gamma=cfg.gamma,
        beta_floor=cfg.beta_floor,
        refresh_period=cfg.refresh_period,
    )
    rng = np.random.default_rng(seed)
    th = Thinner(fixed)
    for r in range(m):
        order = rng.permutation(X.shape[0]) if (permute and r > 0) else np.arange(X.shape[0])
        for i in order:
            th.observe(X[i])
    if th.phase is not Phase.RUNNING:
        raise ValueError("dataset too small to initialize the thinner")
    return th.info.m.copy(), th.quant.c_hat


def _criterion_from_params(criterion, power, dim):
    if isinstance(criterion, CriterionSpec):
        return criterion
    if criterion in ("logdet", "D", "d"):
        return CriterionSpec.logdet(dim)
    if criterion in ("trace_inv_pow", "neg_trace_inv_pow", "phi_q"):
        return CriterionSpec.neg_trace_inv_pow(dim, 1.0 if power is None else power)
    raise ValueError(f"unknown criterion {criterion!r}")


class SequentialThinner(BaseEstimator):
    """Keep a fraction of a stream of regressors, one row at a time.

    Rows of ``X`` are feature vectors ``f(x)``; each contributes the
    rank-one information ``f f^T``.  Rows are examined once, in order, and
    accepted or rejected irrevocably.

    Parameters
    ----------
    alpha : float, optional
        Fraction to keep.  Defaults to ``n_select / horizon`` in the quota
        modes.
    n_select, horizon : int, optional
        Exact number to keep out of a stream of known length (``mode`` in
        ``{"force", "adaptive"}``).  :meth:`fit` uses ``len(X)`` when
        ``horizon`` is None; :meth:`partial_fit` needs it given.
    mode : {"fixed", "force", "adaptive"}
    criterion : {"logdet", "trace_inv_pow"} or CriterionSpec
    power : float, optional
        Exponent q of ``-tr(M^-q)``.
    k0 : int, optional
        Size of the unconditionally selected initial sample (default 5p).
    q_exp, gamma, eps1, beta_floor : float
        Quantile recursion schedule and safeguards.
    replay_passes : int
        When positive (and a quota is set), :meth:`fit` first learns the
        matrix and threshold from that many passes over ``X`` and then
        makes one frozen-threshold selection pass.
    random_state : int, optional
        Seeds the permutations of the replay passes.

    Attributes
    ----------
    support_ : ndarray of bool
        Selection flag of every row seen so far.
    information_matrix_ : ndarray
    threshold_ : float
    n_selected_ : int
    phi_ : float
    """

    def __init__(
        self,
        alpha=None,
        n_select=None,
        horizon=None,
        mode="fixed",
        criterion="logdet",
        power=None,
        k0=None,
        q_exp=5 / 8,
        gamma=1 / 10,
        eps1=0.0,
        beta_floor=0.0,
        refresh_period=1024,
        replay_passes=0,
        random_state=None,
    ):
        self.alpha = alpha
        self.n_select = n_select
        self.horizon = horizon
        self.mode = mode
        self.criterion = criterion
        self.power = power
        self.k0 = k0
        self.q_exp = q_exp
        self.gamma = gamma
        self.eps1 = eps1
        self.beta_floor = beta_floor
        self.refresh_period = refresh_period
        self.replay_passes = replay_passes
        self.random_state = random_state

    def _make_config(self, dim, horizon):
        return ThinnerConfig(
            criterion=_criterion_from_params(self.criterion, self.power, dim),
            alpha=self.alpha,
            mode=self.mode,
            n_target=self.n_select,
            horizon=horizon,
            k0=self.k0,
            eps1=self.eps1,
            q_exp=self.q_exp,
            gamma=self.gamma,
            beta_floor=self.beta_floor,
            refresh_period=self.refresh_period,
        )

    def fit(self, X, y=None):
        X = check_design(X)
        for attr in ("thinner_", "_support"):
            self.__dict__.pop(attr, None)
        if self.replay_passes:
            return self._fit_replay(X)
        horizon = self.horizon
        if horizon is None and Mode(self.mode) is not Mode.FIXED:
            # the whole stream is at hand, so its length is the horizon
            horizon = X.shape[0]
        self.thinner_ = Thinner(self._make_config(X.shape[1], horizon))
        self._support = bytearray()
        self._consume(X)
        return self

    def _fit_replay(self, X):
        if self.n_select is None:
            raise ValueError("replay_passes needs n_select")
        N = X.shape[0]
        check_positive_int(self.n_select, "n_select")
        if self.n_select > N:
            raise ValueError(f"n_select={self.n_select} exceeds the {N} rows of X")
        cfg = ThinnerConfig(
            criterion=_criterion_from_params(self.criterion, self.power, X.shape[1]),
            alpha=self.alpha if self.alpha is not None else self.n_select / N,
            k0=self.k0,
            eps1=self.eps1,
            q_exp=self.q_exp,
            gamma=self.gamma,
            beta_floor=self.beta_floor,
            refresh_period=self.refresh_period,
        )
        m_frozen, c_frozen = run_replay(
            cfg, X, m=self.replay_passes, seed=self.random_state
        )
        replay_cfg = ThinnerConfig(
            criterion=cfg.criterion,
            mode=Mode.REPLAY,
            n_target=self.n_select,
            horizon=N,
            k0=cfg.k0,
            frozen_matrix=m_frozen,
            frozen_threshold=c_frozen,
        )
        self.thinner_ = Thinner(replay_cfg)
        self._support = bytearray()
        self._consume(X)
        return self

    def partial_fit(self, X, y=None):
        if not hasattr(self, "thinner_"):
            X = check_design(X)
            self.thinner_ = Thinner(self._make_config(X.shape[1], self.horizon))
            self._support = bytearray()
        else:
            X = check_design(X, n_features=self.thinner_.spec.dim)
        self._consume(X)
        return self

    def _consume(self, X):
        th, sup = self.thinner_, self._support
        for row in X:
            sup.append(th.observe(row).selected)

    @property
    def support_(self):
        check_is_fitted(self, "thinner_")
        return np.frombuffer(bytes(self._support), dtype=np.uint8).astype(bool)

    def get_support(self, indices=False):
        mask = self.support_
        return np.flatnonzero(mask) if indices else mask

    @property
    def information_matrix_(self):
        check_is_fitted(self, "thinner_")
        return self.thinner_.info.m.copy()

    @property
    def threshold_(self):
        check_is_fitted(self, "thinner_")
        return self.thinner_.threshold

    @property
    def n_selected_(self):
        check_is_fitted(self, "thinner_")
        return self.thinner_.n

    @property
    def phi_(self):
        check_is_fitted(self, "thinner_")
        return self.thinner_.phi

    def decision_function(self, X):
        """Score of each row against the learned matrix, minus the threshold."""
        check_is_fitted(self, "thinner_")
        th = self.thinner_
        X = check_design(X, n_features=th.spec.dim)
        ref = th.frozen if th.frozen is not None else th.info
        if th.spec.kind is CriterionKind.LOGDET:
            minv = ref.inverse()
            s = np.einsum("ij,jk,ik->i", X, minv, X) - th.spec.dim
        else:
            s = np.array([dir_derivative(th.spec, ref, ElementaryInfo.rank_one(r)) for r in X])
        return s - th.threshold

    def predict(self, X):
        """Whether each row would pass the learned (frozen) selection rule."""
        return self.decision_function(X) >= 0.0
