"""Optimal bounded design measures for a handful of analyzed settings.

Each ``oracle_*`` function returns the optimal criterion value ``phi_star``
over measures bounded by ``mu / alpha``, the matching threshold
``c_star`` (the ``1 - alpha`` quantile of the directional derivative at
the optimum, always <= 0), the parameters of the selected region and,
when symmetry pins it down, the optimal matrix itself.  All use log det.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special, stats

from ._validation import check_alpha, check_positive_int

QUAD_TOL = 1e-10
ROOT_TOL = 1e-12


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleResult:
    phi_star: float
    c_star: float
    region: dict = field(default_factory=dict)
    m_star: np.ndarray | None = None

    def as_dict(self):
        out = {"phi_star": self.phi_star, "c_star": self.c_star}
        out.update({k: _plain(v) for k, v in self.region.items()})
        if self.m_star is not None:
            out["m_star"] = self.m_star.tolist()
        return out


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (tuple, list)):
        return [_plain(x) for x in v]
    return float(v) if isinstance(v, (np.floating, float)) else v


def _quad(fun, lo, hi):
    val, err = integrate.quad(fun, lo, hi, epsabs=QUAD_TOL, epsrel=1e-12, limit=200)
    if not math.isfinite(val):
        raise OracleError(f"quadrature failed on [{lo}, {hi}]")
    return val


def _root(fun, lo, hi, what):
    flo, fhi = fun(lo), fun(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise OracleError(f"{what}: root not bracketed on [{lo}, {hi}] ({flo:g}, {fhi:g})")
    return optimize.brentq(fun, lo, hi, xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps, maxiter=500)


def _logdet(m):
    sign, val = np.linalg.slogdet(m)
    if sign <= 0:
        raise OracleError("optimal matrix is not positive definite")
    return float(val)


# ---------------------------------------------------------------------------
# quadratic regression, f = (1, x, x^2), x ~ N(0, 1)


def _normal_moments(lo, hi):
    """``int_lo^hi x^j phi(x) dx`` for j = 0..4.

    Integration by parts gives ``I_j = [-x^(j-1) phi]_lo^hi + (j-1) I_(j-2)``;
    exact, and fast enough for the nested root search.
    """

    def edge(x, j):
        return 0.0 if math.isinf(x) else x ** (j - 1) * stats.norm.pdf(x)

    out = np.empty(5)
    out[0] = special.ndtr(hi) - special.ndtr(lo)
    out[1] = edge(lo, 1) - edge(hi, 1)
    for j in range(2, 5):
        out[j] = edge(lo, j) - edge(hi, j) + (j - 1) * out[j - 2]
    return out


def _quad_normal_matrix(a, b, alpha):
    mom = 2.0 * _normal_moments(a, math.inf) + _normal_moments(-b, b)
    mom[1] = mom[3] = 0.0  # odd moments vanish by symmetry
    return np.array([[mom[i + j] for j in range(3)] for i in range(3)]) / alpha


def _b_from_a(a, alpha):
    # mass condition: 2(Phi(b) - 1/2) + 2(1 - Phi(a)) = alpha
    inner = 0.5 + alpha / 2.0 - stats.norm.sf(a)
    return float(special.ndtri(inner)) if inner > 0.5 else 0.0


def _quad_score(m_inv, x):
    f = np.array([1.0, x, x * x])
    return float(f @ m_inv @ f) - 3.0


def oracle_quad_normal(alpha):
    """Selected region ``(-inf, -a] U [-b, b] U [a, inf)``.

    ``b`` follows from ``a`` through the mass condition; ``a`` is then the
    root of ``F(a) - F(b)``, the equal-score condition at both edges.
    """
    alpha = check_alpha(alpha)
    a_min = float(stats.norm.isf(alpha / 2.0))

    def gap(a):
        b = _b_from_a(a, alpha)
        minv = np.linalg.inv(_quad_normal_matrix(a, b, alpha))
        return _quad_score(minv, a) - _quad_score(minv, b)

    lo = a_min * (1.0 + 1e-12) + 1e-12
    hi = max(2.0 * lo, lo + 1.0)
    while gap(hi) < 0.0:
        hi *= 1.5
        if hi > 40.0:
            raise OracleError("could not bracket the outer edge")
    a = _root(gap, lo, hi, "quadratic-normal edge")
    b = _b_from_a(a, alpha)
    m = _quad_normal_matrix(a, b, alpha)
    c = _quad_score(np.linalg.inv(m), a)
    return OracleResult(_logdet(m), c, {"a": a, "b": b}, m)


# ---------------------------------------------------------------------------
# multilinear regression, X ~ N(0, I_d)


def _radial_density(d):
    # density of ||X|| for X ~ N(0, I_d), via the surface area of S^{d-1}
    logc = math.log(2.0) + (d / 2.0) * math.log(math.pi) - special.gammaln(d / 2.0)
    logc -= (d / 2.0) * math.log(2.0 * math.pi)
    return lambda r: math.exp(logc + (d - 1) * math.log(r) - r * r / 2.0) if r > 0 else 0.0


def multilinear_normal_radius(alpha, d):
    """``(R, rho)`` from radial quadrature: tail mass ``alpha`` beyond ``R``."""
    dens = _radial_density(d)
    mode = math.sqrt(max(d - 1, 1))
    top = mode + 40.0

    def tail(r):
        return _quad(dens, r, mode) + _quad(dens, mode, top) if r < mode else _quad(dens, r, top)

    R = _root(lambda r: tail(r) - alpha, 0.0, top, "multilinear radius")
    if R < mode:
        second = _quad(lambda r: r * r * dens(r), R, mode) + _quad(lambda r: r * r * dens(r), mode, top)
    else:
        second = _quad(lambda r: r * r * dens(r), R, top)
    return R, second / (d * alpha)


def oracle_multilinear_normal(alpha, d=2, intercept=False):
    """``M* = rho I_d`` from selecting ``||x|| >= R``.

    With ``intercept`` the model is ``f = (1, x)`` and ``M* = diag(1, rho I_d)``;
    criterion value and threshold are unchanged.
    """
    alpha = check_alpha(alpha)
    d = check_positive_int(d, "d", minimum=2)
    if d == 2:
        R, rho = math.sqrt(-2.0 * math.log(alpha)), 1.0 - math.log(alpha)
    else:
        R, rho = multilinear_normal_radius(alpha, d)
    m = rho * np.eye(d)
    if intercept:
        m = np.diag(np.r_[1.0, np.full(d, rho)])
    return OracleResult(d * math.log(rho), R * R / rho - d, {"R": R, "rho": rho}, m)


# ---------------------------------------------------------------------------
# d = 2, half N(0, I_2) and half uniform on the four points (+-1, +-1)

_E = math.e


def oracle_mixture_normal_discrete(alpha):
    """Normal tail beyond ``R``, plus a share of the four atoms in the middle regime."""
    alpha = check_alpha(alpha, closed_right=True)
    lo, mid = 1.0 / (2.0 * _E), 1.0 / (2.0 * _E) + 0.5
    if alpha <= lo:
        phi_star = 2.0 * math.log(1.0 - math.log(2.0 * alpha))
        R2, atoms = -2.0 * math.log(2.0 * alpha), 0.0
    elif alpha <= mid:
        phi_star = 2.0 * math.log(1.0 + 1.0 / (2.0 * _E * alpha))
        R2, atoms = 2.0, alpha - lo
    else:
        t = 2.0 * alpha - 1.0
        phi_star = 2.0 * math.log(1.0 - t * math.log(t) / (2.0 * alpha)) if t > 0 else 0.0
        R2, atoms = (-2.0 * math.log(t) if t > 0 else 0.0), 0.5
    rho = math.exp(phi_star / 2.0)
    return OracleResult(
        phi_star,
        R2 / rho - 2.0,
        {"R": math.sqrt(R2), "rho": rho, "atom_mass": atoms},
        rho * np.eye(2),
    )


# ---------------------------------------------------------------------------
# equal mixture of uniform measures on three nested spheres


def oracle_three_spheres(alpha, d, radii=(3.0, 2.0, 1.0)):
    """Take the outer spheres first; the last one reached is partly selected."""
    alpha = check_alpha(alpha, closed_right=True)
    d = check_positive_int(d, "d", minimum=2)
    r1, r2, r3 = (float(r) for r in radii)
    if not r1 > r2 > r3 > 0.0:
        raise ValueError("radii must satisfy r1 > r2 > r3 > 0")
    if alpha <= 1.0 / 3.0:
        second, j = r1**2, 1
    elif alpha <= 2.0 / 3.0:
        second, j = (r1**2 / 3.0 + (alpha - 1.0 / 3.0) * r2**2) / alpha, 2
    else:
        second, j = ((r1**2 + r2**2) / 3.0 + (alpha - 2.0 / 3.0) * r3**2) / alpha, 3
    rho = second / d
    r_edge = (r1, r2, r3)[j - 1]
    return OracleResult(
        d * math.log(rho),
        r_edge**2 / rho - d,
        {"rho": rho, "partial_sphere": j, "radius": r_edge},
        rho * np.eye(d),
    )


# ---------------------------------------------------------------------------
# f = (x, x^2), x ~ U[0, 1]


def oracle_quad01_iboss(alpha):
    """``det`` of the IBOSS limit matrix (selection of ``[0, a/2] U [1 - a/2, 1]``)."""
    a = check_alpha(alpha, closed_right=True)
    return a * a * (a**4 + 25.0 - 40.0 * a + 26.0 * a * a - 8.0 * a**3) / 960.0


def _poly_moments(intervals, alpha):
    # int x^j dx over the intervals, for j = 2, 3, 4
    m = [sum((hi ** (j + 1) - lo ** (j + 1)) / (j + 1) for lo, hi in intervals) for j in (2, 3, 4)]
    return np.array([[m[0], m[1]], [m[1], m[2]]]) / alpha


def _quad01_score(m_inv, x):
    f = np.array([x, x * x])
    return float(f @ m_inv @ f) - 2.0


def _quad01_region(u, b, alpha):
    # the gap between the two intervals is 1/2 - alpha + a, so writing
    # a = max(alpha - 1/2, 0) + exp(u) keeps them apart
    a = max(alpha - 0.5, 0.0) + math.exp(u)
    return a, b, alpha - a - b


def _quad01_equations(v, alpha):
    a, b, c = _quad01_region(v[0], v[1], alpha)
    minv = np.linalg.inv(_poly_moments([(0.5 - a, 0.5 + b), (1.0 - c, 1.0)], alpha))
    fc = _quad01_score(minv, 1.0 - c)
    return [_quad01_score(minv, 0.5 - a) - fc, _quad01_score(minv, 0.5 + b) - fc]


def _quad01_solve(alpha, guess):
    sol, info, ier, msg = optimize.fsolve(
        _quad01_equations, guess, args=(alpha,), xtol=1e-13, full_output=True
    )
    resid = np.max(np.abs(info["fvec"]))
    if not resid < 1e-9:
        raise OracleError(f"edge equations not solved at alpha={alpha} (residual {resid:g})")
    return sol


def _quad01_two_intervals(alpha):
    """``(a, b, c)`` with equal scores at the three inner edges of
    ``[1/2 - a, 1/2 + b] U [1 - c, 1]``, ``c = alpha - a - b``.

    Solved by continuation in ``alpha`` from a small value, where the
    three edges sit close to 1/2, 1/2 and 1.
    """
    # small-alpha shape: a ~ 0.375 alpha, b ~ 0.13 alpha
    t0 = min(alpha, 0.05)
    v = np.array([math.log(0.375 * t0), 0.13 * t0])
    t = t0
    v = _quad01_solve(t, v)
    while t < alpha:
        # smaller steps as the intervals approach each other
        t = min(alpha, t + min(0.025, max((QUAD01_SWITCH - t) / 3.0, 1e-6)))
        v = _quad01_solve(t, v)
    a, b, c = _quad01_region(v[0], v[1], alpha)
    return float(a), float(b), float(c)


def quad01_switch_alpha(gap=1e-10):
    """``alpha`` at which the two optimal intervals merge into one.

    Treats ``alpha`` as the unknown with the gap between the intervals
    pinned, and shrinks the gap geometrically down to ``gap``.
    """
    alpha = 0.725
    a, b, _ = _quad01_two_intervals(alpha)
    v = [math.log(a - (alpha - 0.5)), b]
    w = np.array([alpha, b])
    # past alpha = 1/2 the first unknown is log(gap)
    for g in np.geomspace(math.exp(v[0]), gap, 60)[1:]:
        w, info, ier, msg = optimize.fsolve(
            lambda x, g=g: _quad01_equations([math.log(g), x[1]], x[0]),
            w, xtol=1e-13, full_output=True,
        )
        if not np.max(np.abs(info["fvec"])) < 1e-9:
            raise OracleError(f"merge point not found: {msg}")
    return float(w[0])


def oracle_quad01(alpha):
    """Optimal region for ``f = (x, x^2)`` on ``U[0, 1]``.

    Below the switch point the region is two intervals, one around 1/2
    and one ending at 1; above it the two merge into ``[1 - alpha, 1]``.
    """
    alpha = check_alpha(alpha, closed_right=True)
    edges = None
    if alpha < QUAD01_SWITCH:
        try:
            edges = _quad01_two_intervals(alpha)
        except OracleError:
            # within ~1e-6 of the switch the gap is below 1e-6 and the
            # equations degenerate; the merged interval is the limit
            if QUAD01_SWITCH - alpha > 1e-6:
                raise
    if edges is not None:
        a, b, c = edges
        intervals = [(0.5 - a, 0.5 + b), (1.0 - c, 1.0)]
        m = _poly_moments(intervals, alpha)
        c_star = _quad01_score(np.linalg.inv(m), 1.0 - c)
        return OracleResult(_logdet(m), c_star, {"a": a, "b": b, "intervals": intervals}, m)
    m = _poly_moments([(1.0 - alpha, 1.0)], alpha)
    c_star = _quad01_score(np.linalg.inv(m), 1.0 - alpha)
    return OracleResult(_logdet(m), c_star, {"intervals": [(1.0 - alpha, 1.0)]}, m)


# merge point of the two intervals; recomputed by quad01_switch_alpha in the tests
QUAD01_SWITCH = 0.7541602671


# ---------------------------------------------------------------------------
# f = (1, x, x^2), x ~ U[0, 1]


def _quad_uniform_matrix(ta, tb, alpha):
    iv = [(0.0, ta), (tb, 1.0 - tb), (1.0 - ta, 1.0)]
    mom = [sum((hi ** (j + 1) - lo ** (j + 1)) / (j + 1) for lo, hi in iv) for j in range(5)]
    return np.array([[mom[i + j] for j in range(3)] for i in range(3)]) / alpha


def oracle_quad_uniform(alpha):
    """Region ``[0, ta] U [tb, 1 - tb] U [1 - ta, 1]`` with ``2 ta + 1 - 2 tb = alpha``."""
    alpha = check_alpha(alpha)

    def tb_of(ta):
        return (1.0 + 2.0 * ta - alpha) / 2.0

    def gap(ta):
        minv = np.linalg.inv(_quad_uniform_matrix(ta, tb_of(ta), alpha))
        return _quad_score(minv, ta) - _quad_score(minv, tb_of(ta))

    eps = 1e-9 * alpha
    ta = _root(gap, eps, alpha / 2.0 - eps, "uniform quadratic edge")
    tb = tb_of(ta)
    m = _quad_uniform_matrix(ta, tb, alpha)
    c = _quad_score(np.linalg.inv(m), ta)
    return OracleResult(_logdet(m), c, {"ta": ta, "tb": tb}, m)


# ---------------------------------------------------------------------------
# f = (1, x1, x2), X ~ U[-1, 1]^2

_ALPHA_DISC = 1.0 - math.pi / 4.0


def _square_mass(R):
    # mass of the square outside the disc of radius R, 1 <= R <= sqrt(2)
    return 1.0 + math.pi * R * R / 4.0 - math.sqrt(R * R - 1.0) - R * R * math.asin(1.0 / R)


def uniform_square_radius(alpha):
    alpha = check_alpha(alpha, closed_right=True)
    if alpha >= _ALPHA_DISC:
        return 2.0 * math.sqrt((1.0 - alpha) / math.pi)
    return _root(lambda R: _square_mass(R) - alpha, 1.0, math.sqrt(2.0), "square radius")


def uniform_square_rho(alpha):
    alpha = check_alpha(alpha, closed_right=True)
    if alpha >= _ALPHA_DISC:
        return (2.0 / 3.0 - 2.0 * (1.0 - alpha) ** 2 / math.pi) / (2.0 * alpha)
    R = uniform_square_radius(alpha)
    R2 = R * R
    inner = (
        2.0 / 3.0
        + math.pi * R2 * R2 / 8.0
        - (R2 * R2 / 2.0) * math.asin(1.0 / R)
        - math.sqrt(R2 - 1.0) * (R2 + 2.0) / 6.0
    )
    return inner / (2.0 * alpha)


def oracle_uniform_square(alpha):
    """Select the square minus the centered disc of radius ``R``."""
    alpha = check_alpha(alpha, closed_right=True)
    R = uniform_square_radius(alpha)
    rho = uniform_square_rho(alpha)
    m = np.diag([1.0, rho, rho])
    return OracleResult(2.0 * math.log(rho), R * R / rho - 2.0, {"R": R, "rho": rho}, m)


def uniform_square_iboss(alpha):
    """IBOSS limit matrix ``diag(1, D1, D2)`` for the uniform square."""
    a = check_alpha(alpha, closed_right=True)
    d1 = (8.0 - 5.0 * a + a * a) / 12.0
    d2 = (8.0 - 11.0 * a + 4.0 * a * a) / (3.0 * (2.0 - a) ** 2)
    return np.diag([1.0, d1, d2])


# name -> callable(alpha, **kw), used by the command line and reports
ORACLES = {
    "quad-normal": oracle_quad_normal,
    "quad-uniform": oracle_quad_uniform,
    "multilinear-normal": oracle_multilinear_normal,
    "mixture": oracle_mixture_normal_discrete,
    "spheres": oracle_three_spheres,
    "quad01": oracle_quad01,
    "uniform-square": oracle_uniform_square,
}


def get_oracle(name, alpha, **kw):
    try:
        fn = ORACLES[name]
    except KeyError:
        raise ValueError(f"unknown oracle {name!r}; choose from {sorted(ORACLES)}") from None
    return fn(alpha, **kw)
