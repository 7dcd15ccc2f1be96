"""Independent seeded replications and their aggregate statistics."""
from __future__ import annotations

import dataclasses
import math
import traceback

import numpy as np
from joblib import Parallel, delayed

from .experiment import run_experiment

REDUCERS = ("distance", "efficiency", "phi")


def log_checkpoints(N, per_decade=10, start=None):
    """Roughly log-spaced integers in ``[start, N]``, always including N."""
    start = start or 10
    pts = np.unique(np.round(np.logspace(math.log10(start), math.log10(N), 1 + int(
        per_decade * math.log10(N / start)))).astype(int))
    return [int(k) for k in pts if start <= k <= N]


def child_seeds(seed, reps):
    """One independent SeedSequence per replication."""
    return np.random.SeedSequence(seed).spawn(reps)


def _one(stream, method, seed, oracle, checkpoints):
    try:
        s = dataclasses.replace(stream, seed=seed)
        m = method
        if method.scramble_buffer:
            m = dataclasses.replace(method, scramble_seed=seed.spawn(1)[0])
        res = run_experiment(s, m, oracle=oracle, checkpoints=checkpoints)
        return res.summary, res.checkpoints, None
    except Exception as exc:  # collected and reported with the aggregate
        return None, None, f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}"


def _slope_last_decade(ks, values):
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = ks >= ks[-1] / 10.0
    if mask.sum() < 2:
        return math.nan
    x = np.log10(ks[mask])
    return float(np.polyfit(x, values[mask], 1)[0])


def run_replications(stream, method, reps, reducer="efficiency", seed=0, oracle=True,
                     checkpoints=None, n_jobs=1):
    """Run ``reps`` replications with seeds spawned from ``seed``.

    Reducers:

    ``distance``
        mean of ``log10 ||M_k - M*||_F`` at the checkpoints (log-spaced by
        default) and the least-squares slope against ``log10 k`` over the
        last decade.
    ``efficiency``
        mean and 2-sigma band of the final D-efficiency.
    ``phi``
        mean and standard deviation of the final criterion value.
    """
    if reducer not in REDUCERS:
        raise ValueError(f"unknown reducer {reducer!r}; choose from {REDUCERS}")
    if int(reps) < 1:
        raise ValueError("reps must be >= 1")
    if reducer == "distance" and checkpoints is None:
        checkpoints = log_checkpoints(stream.n_total)
    seeds = child_seeds(seed, int(reps))
    jobs = (delayed(_one)(stream, method, s, oracle, checkpoints) for s in seeds)
    results = Parallel(n_jobs=n_jobs)(jobs) if n_jobs != 1 else [
        _one(stream, method, s, oracle, checkpoints) for s in seeds
    ]
    ok = [(s, c) for s, c, e in results if e is None]
    errors = [e for s, c, e in results if e is not None]
    agg = {"reducer": reducer, "reps": int(reps), "completed": len(ok), "errors": errors}
    if not ok:
        return agg
    summaries = [s for s, _ in ok]
    if reducer == "distance":
        ks = sorted(set.intersection(*(set(c) for _, c in ok)))
        logs = np.array([[math.log10(c[k]) for k in ks] for _, c in ok])
        mean = logs.mean(axis=0)
        agg.update({"k": ks, "mean_log10_dist": mean.tolist(),
                    "slope_last_decade": _slope_last_decade(ks, mean)})
    elif reducer == "efficiency":
        eff = np.array([s.get("efficiency", math.nan) for s in summaries])
        sd = float(eff.std(ddof=1)) if eff.size > 1 else 0.0
        agg.update({"mean": float(eff.mean()), "std": sd,
                    "lower": float(eff.mean() - 2 * sd), "upper": float(eff.mean() + 2 * sd),
                    "values": eff.tolist()})
    else:
        vals = np.array([s["phi"] for s in summaries])
        agg.update({"mean": float(vals.mean()),
                    "std": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
                    "values": vals.tolist()})
    if len(ok) == 1:
        agg["single"] = summaries[0]
    return agg
