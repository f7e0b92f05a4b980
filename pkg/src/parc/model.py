"""Fitted piecewise-affine model and its JSON serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import ColumnSpec, Scaler

FORMAT_NAME = "parc-model"
FORMAT_VERSION = 1

SOFTMAX = "softmax"
VORONOI = "voronoi"


@dataclass
class ParcModel:
    """Piecewise-affine predictor over a single polyhedral partition.

    Every array lives in the scaled feature/target space used for training;
    ``x_scaler`` and ``y_scaler`` map raw encoded features and numeric
    targets to that space.

    Attributes
    ----------
    coef : ndarray of shape (K, m, n)
        Per-region coefficients. Rows ``0..n_numeric-1`` are regressors, then
        one block of ``n_classes[i]`` score rows per categorical target.
    intercept : ndarray of shape (K, m)
    omega : ndarray of shape (K, n)
    gamma : ndarray of shape (K,)
        Separation function ``j(x) = argmax_j omega[j] @ x + gamma[j]``.
    separation : {"softmax", "voronoi"}
    centroids : ndarray of shape (K, n) or None
        Cluster centroids, Voronoi mode only.
    x_bounds : ndarray of shape (2, n) or None
        Componentwise min and max of the raw training features.
    """

    coef: np.ndarray
    intercept: np.ndarray
    omega: np.ndarray
    gamma: np.ndarray
    separation: str = SOFTMAX
    centroids: np.ndarray | None = None
    n_numeric: int = 0
    n_classes: tuple = ()
    x_scaler: Scaler | None = None
    y_scaler: Scaler | None = None
    feature_specs: list = field(default_factory=list)
    target_specs: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    x_bounds: np.ndarray | None = None

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=float)
        self.intercept = np.asarray(self.intercept, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        if self.centroids is not None:
            self.centroids = np.asarray(self.centroids, dtype=float)
        self.n_classes = tuple(int(c) for c in self.n_classes)
        if self.x_bounds is not None:
            self.x_bounds = np.asarray(self.x_bounds, dtype=float).reshape(2, -1)
        K, m, n = self.coef.shape
        if m != self.n_numeric + sum(self.n_classes):
            raise ValueError("coefficient rows do not match the target layout")
        if self.omega.shape != (K, n) or self.gamma.shape != (K,):
            raise ValueError("separation parameters do not match the coefficients")
        if self.x_scaler is None:
            self.x_scaler = Scaler.identity(n)
        if self.y_scaler is None:
            self.y_scaler = Scaler.identity(self.n_numeric)

    @property
    def n_regions(self):
        return self.coef.shape[0]

    @property
    def n_features(self):
        return self.coef.shape[2]

    def class_slices(self):
        """Row slice of each categorical target's score block."""
        out, start = [], self.n_numeric
        for mi in self.n_classes:
            out.append(slice(start, start + mi))
            start += mi
        return out

    def raw_affine(self):
        """Express the model in raw (unscaled) encoded feature and target units.

        Returns ``(coef, intercept, omega, gamma)`` such that numeric outputs
        and classifier scores are affine in the raw feature vector. Class
        scores are left unscaled, so their argmax is unchanged.
        """
        mx, sx = self.x_scaler.mean, self.x_scaler.std
        coef = self.coef / sx
        intercept = self.intercept - coef @ mx
        omega = self.omega / sx
        gamma = self.gamma - omega @ mx
        mc = self.n_numeric
        if mc:
            my, sy = self.y_scaler.mean, self.y_scaler.std
            coef[:, :mc] *= sy[None, :, None]
            intercept[:, :mc] = intercept[:, :mc] * sy + my
        return coef, intercept, omega, gamma

    # -- serialization -------------------------------------------------

    def to_dict(self):
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "separation": self.separation,
            "n_numeric": self.n_numeric,
            "n_classes": list(self.n_classes),
            "coef": self.coef.tolist(),
            "intercept": self.intercept.tolist(),
            "omega": self.omega.tolist(),
            "gamma": self.gamma.tolist(),
            "centroids": None if self.centroids is None else self.centroids.tolist(),
            "x_scaler": self.x_scaler.to_dict(),
            "y_scaler": self.y_scaler.to_dict(),
            "feature_specs": [s.to_dict() for s in self.feature_specs],
            "target_specs": [s.to_dict() for s in self.target_specs],
            "config": self.config,
            "x_bounds": None if self.x_bounds is None else self.x_bounds.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT_NAME:
            raise ValueError("not a PARC model file")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {d.get('version')}")
        n = len(d["omega"][0])
        m = d["n_numeric"] + sum(d["n_classes"])
        K = len(d["gamma"])
        return cls(
            coef=np.asarray(d["coef"], dtype=float).reshape(K, m, n),
            intercept=np.asarray(d["intercept"], dtype=float).reshape(K, m),
            omega=np.asarray(d["omega"], dtype=float).reshape(K, n),
            gamma=np.asarray(d["gamma"], dtype=float),
            separation=d["separation"],
            centroids=None if d["centroids"] is None else np.asarray(d["centroids"], dtype=float),
            n_numeric=d["n_numeric"],
            n_classes=tuple(d["n_classes"]),
            x_scaler=Scaler.from_dict(d["x_scaler"]),
            y_scaler=Scaler.from_dict(d["y_scaler"]),
            feature_specs=[ColumnSpec.from_dict(s) for s in d["feature_specs"]],
            target_specs=[ColumnSpec.from_dict(s) for s in d["target_specs"]],
            config=d.get("config", {}),
            x_bounds=d.get("x_bounds"),
        )

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())
