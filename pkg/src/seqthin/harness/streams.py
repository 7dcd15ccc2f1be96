"""Candidate streams used in the experiments, and the feature maps applied to them.

A stream is described by a :class:`StreamSpec` and is fully determined by
its seed: ``generate_raw`` draws all ``n_total`` raw points at once with
numpy's PCG64 generator, so integer seeds give the same points on every
platform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .._validation import check_positive_int

SOURCES = ("normal", "uniform", "quad-normal", "mixture", "spheres", "ramp", "sine", "file")
MODELS = ("identity", "intercept", "poly")

# default feature map per source
_DEFAULT_MODEL = {
    "quad-normal": "poly",
    "ramp": "poly",
    "sine": "poly",
}


@dataclass(frozen=True)
class StreamSpec:
    """Where candidates come from and how they become feature vectors.

    ``params`` holds source options: ``d`` (dimension), ``radii`` for
    ``spheres``, ``nu`` for ``sine``, ``path`` for ``file``.  ``model`` is
    ``identity`` (f = x), ``intercept`` (f = (1, x)) or ``poly`` (f = (1,
    x, ..., x^degree) of a scalar x).
    """

    source: str
    n_total: int
    seed: int | np.random.SeedSequence | None = 0
    params: dict = field(default_factory=dict)
    model: str | None = None
    degree: int = 2

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown stream source {self.source!r}; choose from {SOURCES}")
        if self.source != "file":
            check_positive_int(self.n_total, "n_total")
        model = self.model or _DEFAULT_MODEL.get(self.source, "identity")
        if model not in MODELS:
            raise ValueError(f"unknown model {model!r}; choose from {MODELS}")
        object.__setattr__(self, "model", model)
        check_positive_int(self.degree, "degree")

    @property
    def d(self):
        if self.source in ("quad-normal", "ramp", "sine"):
            return 1
        if self.source == "mixture":
            return 2
        return int(self.params.get("d", 2))

    @property
    def radii(self):
        return tuple(float(r) for r in self.params.get("radii", (3.0, 2.0, 1.0)))


def parse_stream(text, n_total, seed=0, model=None, degree=2):
    """Build a spec from ``"source"`` or ``"source:key=value,key=value"``.

    ``radii`` values are separated by ``/``, e.g. ``spheres:d=5,radii=3/2/1``.
    ``file:PATH`` is accepted as a shorthand for ``file:path=PATH``.
    """
    source, _, rest = text.partition(":")
    params = {}
    if source == "file" and rest and "=" not in rest.split(",")[0]:
        params["path"] = rest
    elif rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"malformed stream option {item!r} in {text!r}")
            key = key.strip()
            if key == "d":
                params[key] = int(value)
            elif key == "radii":
                params[key] = tuple(float(v) for v in value.split("/"))
            elif key == "nu":
                params[key] = float(value)
            elif key == "path":
                params[key] = value
            else:
                raise ValueError(f"unknown stream option {key!r}")
    return StreamSpec(source, n_total, seed, params, model, degree)


def _uniform_sphere(rng, n, d):
    z = rng.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def read_points(path):
    """One candidate per line, comma-separated coordinates."""
    path = Path(path)
    try:
        with path.open() as fh:
            rows = [line for line in fh if line.strip() and not line.lstrip().startswith("#")]
    except OSError as exc:
        raise OSError(f"cannot read candidate file {path}: {exc}") from exc
    if not rows:
        raise ValueError(f"candidate file {path} has no rows")
    try:
        X = np.array([[float(v) for v in r.split(",")] for r in rows])
    except ValueError as exc:
        raise ValueError(f"candidate file {path}: {exc}") from exc
    if X.ndim != 2:
        raise ValueError(f"candidate file {path}: rows have different lengths")
    return X


def generate_raw(spec):
    """``(N, d)`` array of raw candidate points."""
    N = spec.n_total
    src = spec.source
    if src == "file":
        X = read_points(spec.params["path"])
        return X if not N else X[:N]
    rng = np.random.default_rng(spec.seed)
    d = spec.d
    if src == "normal":
        return rng.standard_normal((N, d))
    if src == "uniform":
        return rng.uniform(-1.0, 1.0, (N, d))
    if src == "quad-normal":
        return rng.standard_normal((N, 1))
    if src == "mixture":
        # half N(0, I_2), half the four corners (+-1, +-1)
        normal = rng.random(N) < 0.5
        X = rng.standard_normal((N, 2))
        corners = rng.choice([-1.0, 1.0], size=(N, 2))
        return np.where(normal[:, None], X, corners)
    if src == "spheres":
        which = rng.integers(0, 3, N)
        r = np.asarray(spec.radii)[which]
        return r[:, None] * _uniform_sphere(rng, N, d)
    i = np.arange(1, N + 1, dtype=float)
    if src == "ramp":
        return (i / N)[:, None]
    if src == "sine":
        nu = float(spec.params.get("nu", 5.0))
        return np.sin(2.0 * math.pi * nu * i / N)[:, None]
    raise AssertionError(src)


def features(X, model, degree=2):
    """Apply the feature map row-wise."""
    X = np.asarray(X, dtype=float)
    if model == "identity":
        return X
    if model == "intercept":
        return np.hstack([np.ones((X.shape[0], 1)), X])
    if model == "poly":
        if X.shape[1] != 1:
            raise ValueError(f"polynomial model needs scalar points, got dimension {X.shape[1]}")
        return X[:, 0:1] ** np.arange(degree + 1)
    raise ValueError(f"unknown model {model!r}")


def generate(spec):
    """``(raw, F)``: raw points and their feature vectors."""
    raw = generate_raw(spec)
    return raw, features(raw, spec.model, spec.degree)
