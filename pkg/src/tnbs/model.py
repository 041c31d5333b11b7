"""TNBS surface evaluation and the NARX wrapper around it.

A model couples a B-spline basis, a lag structure, a tensor train of basis
weights (one core per regressor dimension) and min-max scaling. One-step
prediction builds regressors from measured outputs; free-run simulation feeds
its own outputs back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bspline import BasisConfig, basis_rows, make_basis
from .tensor import TensorTrain

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LagSpec:
    """Which input and output lags feed the surface.

    Input lags may include 0 (the current input); output lags must be at
    least 1. Regressors are ordered input lags ascending, then output lags
    ascending — this ordering is part of the serialized model.
    """

    input_lags: tuple[int, ...]
    output_lags: tuple[int, ...]

    def __post_init__(self):
        in_lags = tuple(sorted({int(l) for l in self.input_lags}))
        out_lags = tuple(sorted({int(l) for l in self.output_lags}))
        if any(l < 0 for l in in_lags):
            raise ValueError("input lags must be non-negative")
        if any(l < 1 for l in out_lags):
            raise ValueError("output lags must be at least 1")
        if not in_lags and not out_lags:
            raise ValueError("at least one lag is required")
        object.__setattr__(self, "input_lags", in_lags)
        object.__setattr__(self, "output_lags", out_lags)

    @property
    def dimension(self) -> int:
        return len(self.input_lags) + len(self.output_lags)

    @property
    def max_input_lag(self) -> int:
        return max(self.input_lags, default=0)

    @property
    def max_output_lag(self) -> int:
        return max(self.output_lags, default=0)

    @property
    def start_index(self) -> int:
        """First sample index at which every lagged regressor exists."""
        return max(self.max_input_lag, self.max_output_lag)


@dataclass(frozen=True)
class Scaling:
    """Min-max parameters mapping raw signals onto [0, 1]."""

    u_min: float
    u_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not self.u_min < self.u_max:
            raise ValueError(f"degenerate input scaling: [{self.u_min}, {self.u_max}]")
        if not self.y_min < self.y_max:
            raise ValueError(f"degenerate output scaling: [{self.y_min}, {self.y_max}]")

    @classmethod
    def fit(cls, u, y) -> "Scaling":
        u = np.asarray(u, dtype=float)
        y = np.asarray(y, dtype=float)
        return cls(
            u_min=float(u.min()), u_max=float(u.max()),
            y_min=float(y.min()), y_max=float(y.max()),
        )

    @classmethod
    def identity(cls) -> "Scaling":
        """No-op scaling for data already living in [0, 1]."""
        return cls(0.0, 1.0, 0.0, 1.0)

    def scale_u(self, v):
        return (np.asarray(v, dtype=float) - self.u_min) / (self.u_max - self.u_min)

    def scale_y(self, v):
        return (np.asarray(v, dtype=float) - self.y_min) / (self.y_max - self.y_min)

    def unscale_y(self, v):
        return self.y_min + np.asarray(v, dtype=float) * (self.y_max - self.y_min)


def fit_scaling(u, y) -> Scaling:
    """Min-max scaling fitted from (estimation) data."""
    return Scaling.fit(u, y)


def _as_signal(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a one-dimensional signal")
    return v


def build_regressors(u, y, lags: LagSpec, scaling: Scaling):
    """Stack scaled lagged samples into rows; returns (X, targets, start).

    Row j (for sample index n = start + j) holds the scaled values
    u_{n-l} for each input lag l ascending, then y_{n-l} for each output lag
    ascending; targets are the scaled y_n.
    """
    u = _as_signal(u, "u")
    y = _as_signal(y, "y")
    if len(u) != len(y):
        raise ValueError(f"signals must have equal length: {len(u)} vs {len(y)}")
    n = len(u)
    start = lags.start_index
    if n <= start:
        raise ValueError(f"signals of length {n} are too short for maximum lag {start}")
    us = scaling.scale_u(u)
    ys = scaling.scale_y(y)
    idx = np.arange(start, n)
    cols = [us[idx - l] for l in lags.input_lags]
    cols += [ys[idx - l] for l in lags.output_lags]
    return np.column_stack(cols), ys[idx], start


def rmse(y, yhat) -> float:
    """Root mean squared error, in whatever units the arguments carry."""
    y = _as_signal(y, "y")
    yhat = _as_signal(yhat, "yhat")
    if len(y) != len(yhat):
        raise ValueError(f"length mismatch: {len(y)} vs {len(yhat)}")
    if len(y) == 0:
        raise ValueError("rmse of empty signals is undefined")
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


@dataclass(frozen=True, eq=False)
class TnbsModel:
    """A fitted (or constructed) tensor network B-spline NARX model."""

    basis: BasisConfig
    lags: LagSpec
    weights: TensorTrain
    scaling: Scaling

    def __post_init__(self):
        d = self.lags.dimension
        if self.weights.order != d:
            raise ValueError(
                f"weight train has {self.weights.order} cores but the lag structure needs {d}"
            )
        k = self.basis.basis_count
        for p, core in enumerate(self.weights.cores):
            if core.shape[1] != k:
                raise ValueError(
                    f"core {p} has middle extent {core.shape[1]}, expected {k} basis functions"
                )

    @property
    def parameter_count(self) -> int:
        return self.weights.n_parameters

    def eval_surface(self, x) -> float:
        """Surface value at one point of the scaled regressor box [0, 1]^d."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or len(x) != self.lags.dimension:
            raise ValueError(
                f"expected {self.lags.dimension} coordinates, got shape {x.shape}"
            )
        return self._surface_point(x)

    def _surface_point(self, x: np.ndarray) -> float:
        # One basis_rows call covers all dimensions: the basis is shared.
        bmat = basis_rows(self.basis, x)
        v = np.ones(1)
        for p, core in enumerate(self.weights.cores):
            v = v @ np.tensordot(bmat[p], core, axes=(0, 1))
        return float(v[0])

    def _surface_rows(self, xs: np.ndarray) -> np.ndarray:
        """Surface values for a batch of scaled regressor rows, shape (n, d)."""
        v = np.ones((xs.shape[0], 1))
        for p, core in enumerate(self.weights.cores):
            b = basis_rows(self.basis, xs[:, p])
            v = np.einsum("na,nac->nc", v, np.einsum("ni,aic->nac", b, core))
        return v[:, 0]

    def predict(self, u, y) -> np.ndarray:
        """One-step predictions from measured lagged outputs.

        Returns predictions for sample indices start..N-1 in original units,
        where start is the largest lag.
        """
        x, _, _ = build_regressors(u, y, self.lags, self.scaling)
        return self.scaling.unscale_y(self._surface_rows(x))

    def simulate(self, u, y_warmup) -> np.ndarray:
        """Free-run simulation: lagged outputs come from the model itself.

        ``y_warmup`` is the prefix of true outputs aligned with u; simulation
        produces one value per remaining sample. The warmup must reach the
        largest lag so every regressor exists at the first simulated step.
        Fed-back outputs are clipped onto the scaled [0, 1] box; the returned
        values are unclipped, in original units.
        """
        u = _as_signal(u, "u")
        y_warmup = np.asarray(y_warmup, dtype=float)
        t0 = len(y_warmup)
        if t0 < self.lags.max_output_lag:
            raise ValueError(
                f"warmup of {t0} samples does not cover the largest output lag "
                f"{self.lags.max_output_lag}"
            )
        if t0 < self.lags.max_input_lag:
            raise ValueError(
                f"warmup of {t0} samples does not cover the largest input lag "
                f"{self.lags.max_input_lag}"
            )
        n = len(u)
        if t0 > n:
            raise ValueError("warmup longer than the input signal")
        us = self.scaling.scale_u(u)
        hist = np.empty(n)
        hist[:t0] = self.scaling.scale_y(y_warmup)
        out = np.empty(n - t0)
        in_lags = self.lags.input_lags
        out_lags = self.lags.output_lags
        x = np.empty(self.lags.dimension)
        n_in = len(in_lags)
        for t in range(t0, n):
            for i, l in enumerate(in_lags):
                x[i] = us[t - l]
            for i, l in enumerate(out_lags):
                x[n_in + i] = hist[t - l]
            s = self._surface_point(x)
            out[t - t0] = s
            hist[t] = min(max(s, 0.0), 1.0)
        return self.scaling.unscale_y(out)

    def save(self, path) -> None:
        """Write the model as JSON; float values round-trip exactly."""
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "degree": self.basis.degree,
            "knot_param": self.basis.knot_param,
            "input_lags": list(self.lags.input_lags),
            "output_lags": list(self.lags.output_lags),
            "scaling": {
                "u_min": self.scaling.u_min,
                "u_max": self.scaling.u_max,
                "y_min": self.scaling.y_min,
                "y_max": self.scaling.y_max,
            },
            "ranks": list(self.weights.ranks),
            "cores": [
                {
                    "shape": list(core.shape),
                    "values": [float(v) for v in core.reshape(-1, order="F")],
                }
                for core in self.weights.cores
            ],
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "TnbsModel":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not a valid model file: {exc}") from None
        if not isinstance(doc, dict) or doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(
                f"{path}: unsupported model format "
                f"(expected format_version {MODEL_FORMAT_VERSION})"
            )
        try:
            basis = make_basis(doc["degree"], doc["knot_param"])
            lags = LagSpec(tuple(doc["input_lags"]), tuple(doc["output_lags"]))
            sc = doc["scaling"]
            scaling = Scaling(sc["u_min"], sc["u_max"], sc["y_min"], sc["y_max"])
            cores = tuple(
                np.asarray(entry["values"], dtype=float).reshape(entry["shape"], order="F")
                for entry in doc["cores"]
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path}: malformed model document: {exc}") from None
        return cls(basis=basis, lags=lags, weights=TensorTrain(cores), scaling=scaling)
