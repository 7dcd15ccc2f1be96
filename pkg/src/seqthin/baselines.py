"""Reference selectors: sequential exchange with a fixed budget, and IBOSS.

Both need the budget ``n`` up front.  The exchange method streams the
data once (or a few times), swapping a kept point for the newcomer when
that increases the criterion.  IBOSS is a batch rule that keeps, for
each coordinate in turn, the most extreme remaining points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_alpha, check_design, check_positive_int
from .criteria import CriterionKind, CriterionSpec, InfoState, phi


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# sequential exchange


@dataclass
class ExchangeState:
    """Active set of ``n`` points, their average information and its inverse.

    ``keys`` identify active points for the duplicate check: dataset row
    indices when available, otherwise the coordinates themselves.
    """

    spec: CriterionSpec
    points: np.ndarray
    keys: list
    info: InfoState
    k: int
    exact: bool = False
    n_swaps: int = 0

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def phi(self):
        if self.spec.kind is CriterionKind.LOGDET and self.info.inv_valid:
            return self.info.logdet
        return phi(self.spec, self.info.m)


def _key(x, index):
    return ("i", index) if index is not None else ("x", x.tobytes())


def exchange_init(spec, F, indices=None, exact=False, refresh_period=1024):
    """Start from the first ``n`` rows of ``F`` (the whole array)."""
    F = np.array(F, dtype=float, copy=True)
    n, p = F.shape
    if p != spec.dim:
        raise ValueError("feature dimension does not match the criterion")
    if n < p:
        raise ValueError("need at least p initial points")
    m = F.T @ F / n
    info = InfoState.from_matrix(0.5 * (m + m.T), count=n, refresh_period=refresh_period)
    if indices is None:
        keys = [_key(F[i], None) for i in range(n)]
    else:
        keys = [_key(None, int(i)) for i in indices]
    return ExchangeState(spec=spec, points=F, keys=keys, info=info, k=n, exact=exact)


def _swap_gains(state, f):
    """Criterion increase (up to a positive factor) of swapping each active point for ``f``."""
    n = state.n
    spec = state.spec
    if spec.kind is CriterionKind.LOGDET and state.info.inv_valid:
        minv = state.info.m_inv
        U = state.points @ minv
        s_i = np.einsum("ij,ij->i", U, state.points)
        s = float(f @ minv @ f)
        if not state.exact:
            return s - s_i
        cross = U @ f
        return s - s_i + (cross**2 - s * s_i) / n
    base = state.phi
    m = state.info.m
    out = np.empty(n)
    fft = np.outer(f, f)
    for i, g in enumerate(state.points):
        cand = m + (fft - np.outer(g, g)) / n
        out[i] = phi(spec, 0.5 * (cand + cand.T)) - base
    return out


def exchange_consider(state, f, index=None):
    """Offer candidate ``f``; swap it in when that improves the design.

    Mutates and returns ``state``.  With ``state.exact`` the swap maximizing
    the exact criterion gain is made when the gain is positive; otherwise
    the candidate replaces the active point of smallest variance when it
    has a larger one.
    """
    f = np.asarray(f, dtype=float).ravel()
    state.k += 1
    key = _key(f, index)
    if key in state.keys:
        return state
    gains = _swap_gains(state, f)
    i_star = int(np.argmax(gains))
    if not gains[i_star] > 0.0:
        return state
    g = state.points[i_star].copy()
    n = state.n
    info = state.info
    # M + (f f^T - g g^T)/n as two rank-one steps on the inverse
    info.m += (np.outer(f, f) - np.outer(g, g)) / n
    if info.inv_valid:
        minv = info.m_inv
        u = minv @ f
        a = 1.0 + float(f @ u) / n
        minv = minv - np.outer(u, u) / (n * a)
        v = minv @ g
        b = 1.0 - float(g @ v) / n
        if b > 1e-14:
            info.m_inv = minv + np.outer(v, v) / (n * b)
            info.logdet += math.log(a) + math.log(b)
            info._since_refresh += 1
            if info._since_refresh >= info.refresh_period:
                info.refresh()
        else:
            info.refresh()
    else:
        info.refresh()
    state.points[i_star] = f
    state.keys[i_star] = key
    state.n_swaps += 1
    return state


class SequentialExchange(BaseEstimator):
    """Keep exactly ``n_select`` rows, improving the set by one-pass exchanges.

    Parameters
    ----------
    n_select : int
    rule : {"simplified", "exact"}
        ``"simplified"`` compares variances ``f^T M^-1 f`` only;
        ``"exact"`` uses the exact gain of the swap.
    n_passes : int
        Further passes over the data (optionally permuted) after the first.
    permute : bool
    random_state : int, optional

    Attributes
    ----------
    support_ : ndarray of bool
    information_matrix_ : ndarray
    phi_ : float
    """

    def __init__(self, n_select=100, rule="simplified", criterion="logdet", power=None,
                 n_passes=1, permute=True, random_state=None):
        self.n_select = n_select
        self.rule = rule
        self.criterion = criterion
        self.power = power
        self.n_passes = n_passes
        self.permute = permute
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_design(X)
        N, p = X.shape
        n = check_positive_int(self.n_select, "n_select", minimum=p)
        if n > N:
            raise ValueError("n_select exceeds the number of rows")
        if self.rule not in ("simplified", "exact"):
            raise ValueError(f"unknown rule {self.rule!r}")
        from .thinner import _criterion_from_params

        spec = _criterion_from_params(self.criterion, self.power, p)
        st = exchange_init(spec, X[:n], indices=np.arange(n), exact=self.rule == "exact")
        for i in range(n, N):
            exchange_consider(st, X[i], index=i)
        rng = np.random.default_rng(self.random_state)
        for _ in range(int(self.n_passes) - 1):
            order = rng.permutation(N) if self.permute else np.arange(N)
            for i in order:
                exchange_consider(st, X[i], index=int(i))
        self.state_ = st
        mask = np.zeros(N, dtype=bool)
        mask[[k[1] for k in st.keys]] = True
        self.support_ = mask
        return self

    def get_support(self, indices=False):
        check_is_fitted(self, "state_")
        return np.flatnonzero(self.support_) if indices else self.support_

    @property
    def information_matrix_(self):
        check_is_fitted(self, "state_")
        return self.state_.info.m.copy()

    @property
    def phi_(self):
        check_is_fitted(self, "state_")
        return self.state_.phi


# ---------------------------------------------------------------------------
# IBOSS


def iboss_counts(n, d):
    """Number of (largest, smallest) points taken for each coordinate.

    ``r = n // (2d)`` pairs each; leftover pairs go to the leading
    coordinates, and an odd leftover point to the last coordinate.
    """
    r, rem = divmod(n, 2 * d)
    counts = [[r, r] for _ in range(d)]
    extra_pairs, odd = divmod(rem, 2)
    for j in range(extra_pairs):
        counts[j][0] += 1
        counts[j][1] += 1
    if odd:
        counts[-1][0] += 1
    return counts


def iboss_select(X, n, order=None):
    """Indices of the ``n`` rows kept by IBOSS, coordinates taken in ``order``."""
    X = check_design(X)
    N, d = X.shape
    n = check_positive_int(n, "n")
    if n > N:
        raise ValueError(f"cannot select n={n} of N={N} points")
    if n == N:
        return np.arange(N)
    order = list(range(d)) if order is None else list(order)
    if sorted(order) != list(range(d)):
        raise ValueError("order must be a permutation of the coordinates")
    counts = iboss_counts(n, d)
    remaining = np.arange(N)
    chosen = []
    need = n
    for pos, j in enumerate(order):
        n_hi, n_lo = counts[pos]
        if pos == d - 1:
            n_hi, n_lo = need - need // 2, need // 2
        take = n_hi + n_lo
        if take == 0:
            continue
        vals = X[remaining, j]
        m = remaining.size
        if take >= m:
            picked = np.arange(m)
        else:
            srt = np.argsort(vals, kind="stable")
            picked = np.concatenate([srt[m - n_hi:], srt[:n_lo]]) if n_lo else srt[m - n_hi:]
        chosen.append(remaining[picked])
        keep = np.ones(m, dtype=bool)
        keep[picked] = False
        remaining = remaining[keep]
        need -= picked.size
    out = np.concatenate(chosen) if chosen else np.empty(0, dtype=int)
    return np.sort(out)


class IBOSSSelector(BaseEstimator):
    """Batch information-based subdata selection.

    Attributes
    ----------
    support_ : ndarray of bool
    """

    def __init__(self, n_select=100, order=None):
        self.n_select = n_select
        self.order = order

    def fit(self, X, y=None):
        X = check_design(X)
        idx = iboss_select(X, self.n_select, self.order)
        mask = np.zeros(X.shape[0], dtype=bool)
        mask[idx] = True
        self.support_ = mask
        self.n_features_in_ = X.shape[1]
        return self

    def get_support(self, indices=False):
        check_is_fitted(self, "support_")
        return np.flatnonzero(self.support_) if indices else self.support_


# ---------------------------------------------------------------------------
# asymptotic IBOSS moment matrix for independent coordinates


@dataclass(frozen=True)
class MarginalSpec:
    """One coordinate's distribution: moments, quantile function and density."""

    mean: float
    second_moment: float
    quantile: Callable[[float], float]
    pdf: Callable[[float], float]

    @classmethod
    def from_scipy(cls, dist):
        """Wrap a frozen ``scipy.stats`` continuous distribution."""
        return cls(
            mean=float(dist.mean()),
            second_moment=float(dist.moment(2)),
            quantile=dist.ppf,
            pdf=dist.pdf,
        )

    def partial_moment(self, power, lo, hi, tol=1e-10):
        val, err = integrate.quad(
            lambda x: x**power * self.pdf(x), lo, hi, epsabs=tol, epsrel=1e-12, limit=200
        )
        if not np.isfinite(val) or err > 1e3 * tol:
            raise QuadratureError(
                f"partial moment x^{power} on [{lo}, {hi}] did not converge (err={err:g})"
            )
        return val


def v_iboss_asymptotic(marginals, alpha, d=None):
    """Limit of ``(1/n) sum x x^T`` over the IBOSS-selected points.

    ``marginals`` is one :class:`MarginalSpec` per coordinate (or a single
    one repeated ``d`` times), coordinates inspected in list order.
    """
    alpha = check_alpha(alpha, closed_right=True)
    if isinstance(marginals, MarginalSpec):
        if d is None:
            raise ValueError("d is required with a single marginal")
        marginals = [marginals] * d
    marginals = list(marginals)
    d = len(marginals) if d is None else d
    if len(marginals) != d:
        raise ValueError("need one marginal per coordinate")
    pis, s, mk = [], [], []
    for k, mg in enumerate(marginals, start=1):
        denom = d - (k - 1) * alpha
        if k == d:
            # (1 - alpha) cancels, which keeps alpha = 1 finite
            pis.append(denom / d)
        else:
            pis.append((1.0 - alpha) * denom / (d - k * alpha))
        t = alpha / (2.0 * denom)
        lo, hi = mg.quantile(t), mg.quantile(1.0 - t)
        s.append(mg.partial_moment(2, lo, hi))
        mk.append(mg.partial_moment(1, lo, hi))
    V = np.empty((d, d))
    for k in range(d):
        V[k, k] = (marginals[k].second_moment - pis[k] * s[k]) / alpha
        for j in range(k + 1, d):
            if alpha < 1.0:
                corr = pis[k] * pis[j] / (1.0 - alpha) * mk[k] * mk[j]
            else:
                corr = 0.0
            V[k, j] = V[j, k] = (marginals[k].mean * marginals[j].mean - corr) / alpha
    return V
