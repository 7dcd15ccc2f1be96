"""Run one selector over one stream and summarize the outcome."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import oracles
from ..baselines import exchange_consider, exchange_init, iboss_select
from ..criteria import CriterionSpec, phi
from ..scrambler import scramble
from ..thinner import Mode, Thinner, ThinnerConfig
from .streams import StreamSpec, generate
from .trace import TraceWriter

METHODS = ("thinner", "exchange", "iboss")


@dataclass(frozen=True)
class MethodConfig:
    """Selector settings.

    Give ``alpha`` for the fixed-rate thinner, or ``n`` (the horizon is
    the stream length) for ``force``/``adaptive`` quotas, exchange and IBOSS.
    """

    method: str = "thinner"
    alpha: float | None = None
    n: int | None = None
    mode: str = "fixed"
    k0: int | None = None
    eps1: float = 0.0
    q_exp: float = 5 / 8
    gamma: float = 1 / 10
    scramble_buffer: int | None = None
    scramble_seed: int | None = None
    exchange_rule: str = "simplified"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        Mode(self.mode)
        if self.method == "thinner" and self.mode == "fixed" and self.alpha is None:
            raise ValueError("fixed-rate thinning needs alpha")
        if self.method != "thinner" or self.mode != "fixed":
            if self.n is None and self.alpha is None:
                raise ValueError(f"{self.method}/{self.mode} needs n or alpha")


@dataclass
class RunResult:
    summary: dict
    matrix: np.ndarray
    selected: np.ndarray
    checkpoints: dict = field(default_factory=dict)


def oracle_for(stream: StreamSpec, alpha, name=None):
    """Oracle matching ``stream`` (or the named one), or None when there is none."""
    src = stream.source
    if name is None:
        name = {
            "quad-normal": "quad-normal",
            "normal": "multilinear-normal",
            "mixture": "mixture",
            "spheres": "spheres",
            "ramp": "quad-uniform",
        }.get(src)
        if src == "uniform" and stream.d == 2 and stream.model == "intercept":
            name = "uniform-square"
        if name is None:
            return None
    kw = {}
    if name == "multilinear-normal":
        kw = {"d": stream.d, "intercept": stream.model == "intercept"}
    elif name == "spheres":
        kw = {"d": stream.d, "radii": stream.radii}
    return oracles.get_oracle(name, alpha, **kw)


def _order(N, method):
    if method.scramble_buffer:
        return np.fromiter(
            scramble(range(N), method.scramble_buffer, method.scramble_seed), dtype=np.int64, count=N
        )
    return np.arange(N)


def _efficiency(p, phi_val, oracle):
    if oracle is None or not math.isfinite(phi_val):
        return math.nan
    return math.exp((phi_val - oracle.phi_star) / p)


def run_experiment(stream, method, oracle=None, trace_path=None, checkpoints=None, spec=None):
    """Stream candidates into the selector.

    ``oracle`` is an :class:`~seqthin.oracles.OracleResult`, an oracle
    name, ``True`` (pick the one matching the stream) or None.
    ``checkpoints`` lists values of k at which ``||M - M*||_F`` is recorded
    (requires an oracle with ``m_star``).
    """
    t0 = time.perf_counter()
    raw, F = generate(stream)
    N, p = F.shape
    spec = spec or CriterionSpec.logdet(p)
    if spec.dim != p:
        raise ValueError(f"criterion dimension {spec.dim} does not match feature dimension {p}")
    alpha = method.alpha if method.alpha is not None else method.n / N
    if oracle is True or isinstance(oracle, str):
        oracle = oracle_for(stream, alpha, None if oracle is True else oracle)
    if oracle is not None and oracle.m_star is not None and oracle.m_star.shape != (p, p):
        raise ValueError(
            f"oracle matrix is {oracle.m_star.shape[0]}x{oracle.m_star.shape[0]}, features are {p}"
        )
    order = _order(N, method)
    runner = {"thinner": _run_thinner, "exchange": _run_exchange, "iboss": _run_iboss}[method.method]
    writer = TraceWriter(trace_path, efficiency=oracle is not None) if trace_path else None
    try:
        if writer:
            writer.__enter__()
        res = runner(F[order], order, method, spec, alpha, oracle, writer, checkpoints or ())
    finally:
        if writer:
            writer.close()
    m = res.matrix
    phi_final = phi(spec, 0.5 * (m + m.T))
    res.summary.update(
        {
            "method": method.method,
            "mode": method.mode if method.method == "thinner" else None,
            "source": stream.source,
            "N": int(N),
            "p": int(p),
            "alpha": float(alpha),
            "phi": phi_final,
            "runtime": time.perf_counter() - t0,
        }
    )
    if oracle is not None:
        res.summary["phi_star"] = oracle.phi_star
        res.summary["c_star"] = oracle.c_star
        res.summary["efficiency"] = _efficiency(p, phi_final, oracle)
    return res


def _cfg_for(method, spec, alpha, N):
    mode = Mode(method.mode)
    n = method.n if method.n is not None else (round(alpha * N) if mode is not Mode.FIXED else None)
    return ThinnerConfig(
        criterion=spec,
        alpha=alpha if mode is Mode.FIXED else None,
        mode=mode,
        n_target=n if mode is not Mode.FIXED else None,
        horizon=N if mode is not Mode.FIXED else None,
        k0=method.k0,
        eps1=method.eps1,
        q_exp=method.q_exp,
        gamma=method.gamma,
    )


def _run_thinner(F, order, method, spec, alpha, oracle, writer, checkpoints):
    N, p = F.shape
    th = Thinner(_cfg_for(method, spec, alpha, N))
    chosen = np.zeros(N, dtype=bool)
    cps = set(int(c) for c in checkpoints)
    dist = {}
    m_star = oracle.m_star if oracle is not None else None
    if cps and m_star is None:
        raise ValueError("checkpoints need an oracle with a known optimal matrix")
    for i in range(N):
        dec = th.observe(F[i])
        chosen[i] = dec.selected
        if writer:
            writer.write(
                dec.k, dec.selected, dec.n_selected, dec.score, dec.threshold, dec.phi_after,
                _efficiency(p, dec.phi_after, oracle) if oracle is not None else None,
            )
        if dec.k in cps:
            dist[dec.k] = float(np.linalg.norm(th.info.m - m_star))
    summary = {"n_selected": th.n, "threshold": th.threshold, "phi_tracked": th.phi}
    sel = np.sort(order[chosen])
    return RunResult(summary, th.info.m.copy(), sel, dist)


def _run_exchange(F, order, method, spec, alpha, oracle, writer, checkpoints):
    N, p = F.shape
    n = method.n if method.n is not None else max(p, round(alpha * N))
    st = exchange_init(spec, F[:n], indices=order[:n], exact=method.exchange_rule == "exact")
    if writer:
        for k in range(1, n + 1):
            ph = st.phi if k == n else -math.inf
            writer.write(k, True, k, math.nan, math.nan, ph,
                         _efficiency(p, ph, oracle) if oracle is not None else None)
    for i in range(n, N):
        before = st.n_swaps
        if writer:
            s = float(F[i] @ st.info.inverse() @ F[i]) - p
        exchange_consider(st, F[i], index=int(order[i]))
        if writer:
            ph = st.phi
            writer.write(i + 1, st.n_swaps > before, n, s, math.nan, ph,
                         _efficiency(p, ph, oracle) if oracle is not None else None)
    sel = np.sort(np.array([key[1] for key in st.keys]))
    return RunResult({"n_selected": n, "threshold": math.nan, "n_swaps": st.n_swaps},
                     st.info.m.copy(), sel)


def _run_iboss(F, order, method, spec, alpha, oracle, writer, checkpoints):
    N, p = F.shape
    n = method.n if method.n is not None else round(alpha * N)
    # IBOSS looks at the raw coordinates: drop a leading intercept column
    cols = F[:, 1:] if np.all(F[:, 0] == 1.0) and p > 1 else F
    idx = iboss_select(cols, n)
    chosen = np.zeros(N, dtype=bool)
    chosen[idx] = True
    m = F[idx].T @ F[idx] / n
    if writer:
        count = 0
        final = phi(spec, 0.5 * (m + m.T))
        for i in range(N):
            count += int(chosen[i])
            ph = final if i == N - 1 else math.nan
            writer.write(i + 1, chosen[i], count, math.nan, math.nan, ph,
                         _efficiency(p, ph, oracle) if oracle is not None else None)
    sel = np.sort(order[idx])
    return RunResult({"n_selected": int(n), "threshold": math.nan}, m, sel)


def summary_json_safe(summary):
    """Replace non-finite floats by strings so the record is strict JSON."""
    out = {}
    for k, v in summary.items():
        if isinstance(v, float) and not math.isfinite(v):
            out[k] = repr(v)
        elif isinstance(v, (np.floating, np.integer)):
            out[k] = v.item()
        else:
            out[k] = v
    return out


def describe(stream, method):
    return {"stream": {**asdict(stream), "seed": _seed_repr(stream.seed)}, "method": asdict(method)}


def _seed_repr(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    return seed
