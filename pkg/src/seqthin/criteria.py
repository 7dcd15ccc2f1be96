"""Concave design criteria and the running information matrix.

Two criteria are supported: ``log det(M)`` and ``-tr(M^{-q})``.  The
running matrix is the average of the elementary information matrices of
the selected points; for rank-one contributions its inverse (and, for
log det, its log-determinant) is maintained by rank-one updates so that
scoring a candidate costs O(p^2).
"""
from __future__ import annotations

import copy
import enum
import math
from dataclasses import dataclass, field

import numpy as np

# reciprocal condition number below which a matrix is treated as singular
RCOND_SINGULAR = 1e-12


class SingularMatrixError(ValueError):
    """Raised when an operation needs a nonsingular information matrix."""


class CriterionKind(str, enum.Enum):
    LOGDET = "logdet"
    NEG_TRACE_INV_POW = "neg_trace_inv_pow"


@dataclass(frozen=True)
class CriterionSpec:
    """Which criterion to maximize, for ``dim`` x ``dim`` matrices.

    ``power`` is only meaningful for ``NEG_TRACE_INV_POW`` and must lie in
    (-1, inf) without 0.
    """

    kind: CriterionKind
    dim: int
    power: float | None = None

    def __post_init__(self):
        kind = CriterionKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"dim must be an integer >= 2, got {self.dim!r}")
        if kind is CriterionKind.LOGDET:
            if self.power is not None:
                raise ValueError("power must be None for the log-det criterion")
        else:
            if self.power is None:
                raise ValueError("power is required for -tr(M^-q)")
            q = float(self.power)
            if not q > -1.0 or q == 0.0 or not math.isfinite(q):
                raise ValueError(f"power must be in (-1, inf) and nonzero, got {q}")

    @classmethod
    def logdet(cls, dim):
        return cls(CriterionKind.LOGDET, dim)

    @classmethod
    def neg_trace_inv_pow(cls, dim, power):
        return cls(CriterionKind.NEG_TRACE_INV_POW, dim, float(power))

    @property
    def integer_power(self):
        return (
            self.kind is CriterionKind.NEG_TRACE_INV_POW
            and float(self.power).is_integer()
            and self.power > 0
        )

    @property
    def tracks_inverse(self):
        """Whether rank-one updates of the inverse pay off for this criterion."""
        return self.kind is CriterionKind.LOGDET or self.integer_power


@dataclass(frozen=True)
class ElementaryInfo:
    """Information contributed by one design point.

    Either rank one, ``weight * f f^T``, or a full symmetric PSD matrix.
    """

    f: np.ndarray | None = None
    weight: float = 1.0
    full: np.ndarray | None = None

    def __post_init__(self):
        if (self.f is None) == (self.full is None):
            raise ValueError("exactly one of f (rank one) or full must be given")
        if self.f is not None:
            f = np.asarray(self.f, dtype=float).ravel()
            object.__setattr__(self, "f", f)
            if not self.weight > 0:
                raise ValueError("weight must be positive")
        else:
            a = np.asarray(self.full, dtype=float)
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise ValueError("full elementary matrix must be square")
            if not np.array_equal(a, a.T):
                raise ValueError("full elementary matrix must be exactly symmetric")
            object.__setattr__(self, "full", a)

    @classmethod
    def rank_one(cls, f, weight=1.0):
        return cls(f=f, weight=weight)

    @classmethod
    def from_matrix(cls, a):
        return cls(full=a)

    @property
    def is_rank_one(self):
        return self.f is not None

    @property
    def dim(self):
        return self.f.shape[0] if self.f is not None else self.full.shape[0]

    def matrix(self):
        if self.f is not None:
            return self.weight * np.outer(self.f, self.f)
        return self.full


def _check_square_symmetric(m, dim=None):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise ValueError(f"dimension mismatch: matrix is {m.shape[0]}, criterion is {dim}")
    scale = max(1.0, float(np.max(np.abs(m))))
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("matrix is not symmetric")
    return m


def _spd_eig(m):
    """Eigen-decomposition, or None when ``m`` is numerically singular."""
    w, v = np.linalg.eigh(m)
    if w[0] <= 0.0 or w[0] < RCOND_SINGULAR * w[-1]:
        return None
    return w, v


def is_singular(m):
    w = np.linalg.eigvalsh(m)
    return bool(w[0] <= 0.0 or w[0] < RCOND_SINGULAR * w[-1])


def phi(spec, m):
    """Criterion value; ``-inf`` for a singular matrix."""
    m = _check_square_symmetric(m, spec.dim)
    eig = _spd_eig(m)
    if eig is None:
        return -math.inf
    w, _ = eig
    if spec.kind is CriterionKind.LOGDET:
        return float(np.sum(np.log(w)))
    return float(-np.sum(w ** (-spec.power)))


def grad_phi(spec, m):
    """Gradient of the criterion at a nonsingular ``m`` (a SPD matrix)."""
    m = _check_square_symmetric(m, spec.dim)
    eig = _spd_eig(m)
    if eig is None:
        raise SingularMatrixError("gradient undefined: information matrix is singular")
    w, v = eig
    if spec.kind is CriterionKind.LOGDET:
        d = 1.0 / w
    else:
        d = spec.power * w ** (-(spec.power + 1.0))
    g = (v * d) @ v.T
    return 0.5 * (g + g.T)


def d_efficiency(spec, m, m_star):
    """``[det(m) / det(m_star)]^(1/p)``."""
    if spec.kind is not CriterionKind.LOGDET:
        raise ValueError("D-efficiency is defined for the log-det criterion")
    a, b = phi(spec, m), phi(spec, m_star)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise SingularMatrixError("D-efficiency needs nonsingular matrices")
    return math.exp((a - b) / spec.dim)


@dataclass
class InfoState:
    """Running average information matrix of the selected points.

    ``m_inv`` (and ``logdet``) are only trustworthy when ``inv_valid``.
    With ``track_inverse`` set, rank-one selections update the inverse by
    Sherman-Morrison; every ``refresh_period`` selections it is
    recomputed from ``m`` to stop drift.
    """

    m: np.ndarray
    m_inv: np.ndarray | None = None
    count: int = 0
    refresh_period: int = 1024
    track_inverse: bool = True
    inv_valid: bool = False
    logdet: float = -math.inf
    _since_refresh: int = field(default=0, repr=False)

    @classmethod
    def empty(cls, dim, refresh_period=1024, track_inverse=True):
        return cls(
            m=np.zeros((dim, dim)),
            refresh_period=refresh_period,
            track_inverse=track_inverse,
        )

    @classmethod
    def from_matrix(cls, m, count, refresh_period=1024, track_inverse=True):
        m = _check_square_symmetric(m)
        state = cls(
            m=0.5 * (m + m.T),
            count=int(count),
            refresh_period=refresh_period,
            track_inverse=track_inverse,
        )
        state.refresh()
        return state

    @property
    def dim(self):
        return self.m.shape[0]

    def copy(self):
        return copy.deepcopy(self)

    def refresh(self):
        """Recompute the inverse and log-determinant from ``m``."""
        self._since_refresh = 0
        eig = _spd_eig(self.m)
        if eig is None:
            self.inv_valid = False
            self.m_inv = None
            self.logdet = -math.inf
            return False
        w, v = eig
        inv = (v / w) @ v.T
        self.m_inv = 0.5 * (inv + inv.T)
        self.logdet = float(np.sum(np.log(w)))
        self.inv_valid = True
        return True

    def inverse(self):
        if not self.inv_valid and not self.refresh():
            raise SingularMatrixError("information matrix is singular")
        return self.m_inv

    def update(self, e):
        """Average ``e`` into the matrix, in place."""
        n = self.count
        if e.is_rank_one:
            f, w = e.f, e.weight
            if n == 0:
                self.m = w * np.outer(f, f)
            else:
                self.m *= n / (n + 1.0)
                self.m += np.outer((w / (n + 1.0)) * f, f)
            if self.track_inverse and self.inv_valid and n > 0:
                u = self.m_inv @ f
                s = float(f @ u)
                denom = n + w * s
                if denom > 0.0 and math.isfinite(denom):
                    inv = self.m_inv
                    inv -= np.outer((w / denom) * u, u)
                    inv *= 1.0 + 1.0 / n
                    self.logdet += self.dim * math.log(n / (n + 1.0)) + math.log1p(w * s / n)
                else:
                    self.inv_valid = False
            else:
                self.inv_valid = False
        else:
            a = e.full
            if n == 0:
                self.m = a.copy()
            else:
                self.m += (a - self.m) / (n + 1)
                self.m = 0.5 * (self.m + self.m.T)
            self.inv_valid = False
        self.count = n + 1
        self._since_refresh += 1
        if self.track_inverse and (
            not self.inv_valid or self._since_refresh >= self.refresh_period
        ) and self.count >= self.dim:
            self.refresh()
        return self


def select_update(state, e):
    """Return a copy of ``state`` with ``e`` averaged in."""
    return state.copy().update(e)


def _score_rank_one(spec, state, f, weight):
    minv = state.inverse()
    if spec.kind is CriterionKind.LOGDET:
        return weight * float(f @ minv @ f) - state.dim
    q = spec.power
    if spec.integer_power:
        pq = np.linalg.matrix_power(minv, int(q))
        return q * (weight * float(f @ (minv @ (pq @ f))) - float(np.trace(pq)))
    g = grad_phi(spec, state.m)
    return weight * float(f @ g @ f) - float(np.sum(g * state.m))


def dir_derivative(spec, state, e):
    """Directional derivative of the criterion at ``state.m`` towards ``e``.

    For log det with a rank-one ``e`` this is ``w f^T M^{-1} f - p``, using
    the maintained inverse.
    """
    if e.dim != spec.dim or state.dim != spec.dim:
        raise ValueError("dimension mismatch between criterion, state and point")
    if e.is_rank_one and (state.inv_valid or spec.tracks_inverse):
        return _score_rank_one(spec, state, e.f, e.weight)
    g = grad_phi(spec, state.m)
    return float(np.sum(g * (e.matrix() - state.m)))


def dir_derivative_direct(spec, m, a):
    """``tr[grad(m) (a - m)]`` from a fresh factorization (reference path)."""
    g = grad_phi(spec, m)
    return float(np.sum(g * (np.asarray(a, dtype=float) - m)))
