"""Synthetic spatially varying mediation data with known coefficient surfaces.

The generator mirrors the three-equation structure fitted by
:func:`geomediate.mediation.fit_spatial_mediation`::

    M = sum_j alpha_j(u, v) x_j + e_M
    y = sum_j gamma'_j(u, v) x_j + beta(u, v) M + e_y

with ``x_0 = 1``. Coordinates live on a square of side ``extent`` meters.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _rng
from .core_model import Dataset
from .errors import BadConfig, DimensionMismatch, EmptyMask

FIELD_KINDS = ("constant", "linear_gradient", "sinusoidal", "sign_flip_boundary")
LAYOUTS = ("uniform_random", "grid")


@dataclass(frozen=True)
class Field:
    """A coefficient surface on the unit square (coordinates divided by extent).

    * ``constant``: ``level``
    * ``linear_gradient``: ``level + amplitude * (s - 0.5)`` with ``s`` the
      position along ``angle`` (radians, 0 = east)
    * ``sinusoidal``: ``level + amplitude * sin(pi f s) * sin(pi f t)``
    * ``sign_flip_boundary``: ``level + amplitude * tanh((s - 0.5) / width)``
    """

    kind: str = "constant"
    level: float = 0.0
    amplitude: float = 0.0
    frequency: float = 1.0
    angle: float = 0.0
    width: float = 0.05

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise BadConfig(f"unknown field kind {self.kind!r}")

    def __call__(self, s, t):
        if self.kind == "constant":
            return np.full_like(s, self.level, dtype=float)
        a = math.cos(self.angle) * (s - 0.5) + math.sin(self.angle) * (t - 0.5) + 0.5
        if self.kind == "linear_gradient":
            return self.level + self.amplitude * (a - 0.5)
        if self.kind == "sinusoidal":
            f = self.frequency
            return self.level + self.amplitude * np.sin(math.pi * f * s) * np.sin(math.pi * f * t)
        return self.level + self.amplitude * np.tanh((a - 0.5) / self.width)


def constant(c):
    return Field("constant", level=float(c))


@dataclass(frozen=True)
class SynthConfig:
    n: int = 200
    p: int = 2
    layout: str = "uniform_random"
    mediator_fields: tuple = ()
    outcome_fields: tuple = ()
    mediator_effect: Field = field(default_factory=lambda: constant(0.7))
    noise_sd: tuple = (0.2, 0.2)
    seed: int = 42
    extent: float = 1000.0

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise BadConfig(f"unknown layout {self.layout!r}")
        if self.p < 1:
            raise BadConfig("need at least one predictor")
        if self.n < self.p + 3:
            raise BadConfig(f"n = {self.n} below the minimum p + 3 = {self.p + 3}")
        if any(s < 0 for s in self.noise_sd):
            raise BadConfig("noise_sd must be nonnegative")
        for fields in (self.mediator_fields, self.outcome_fields):
            if fields and len(fields) != self.p + 1:
                raise BadConfig("coefficient fields need one entry per term (intercept first)")
        if not self.extent > 0:
            raise BadConfig("extent must be positive")

    def fields(self):
        med = self.mediator_fields or tuple([constant(0.0)] + [constant(0.5)] * self.p)
        out = self.outcome_fields or tuple([constant(0.0)] + [constant(0.3)] * self.p)
        return med, out


@dataclass(frozen=True)
class TruthBundle:
    alpha: np.ndarray          # n x (p+1), mediator equation
    gamma_prime: np.ndarray    # n x (p+1), direct effects in the outcome equation
    beta: np.ndarray           # n, mediator -> outcome
    names: tuple

    @property
    def indirect(self):
        return self.alpha[:, 1:] * self.beta[:, None]

    @property
    def direct(self):
        return self.gamma_prime[:, 1:]

    @property
    def total(self):
        return self.direct + self.indirect

    @property
    def gamma(self):
        """Reduced-form coefficients of ``y`` on ``x`` (intercept first)."""
        return self.gamma_prime + self.alpha * self.beta[:, None]

    def to_json(self, path=None):
        payload = {
            "names": list(self.names),
            "alpha": self.alpha.tolist(),
            "gamma_prime": self.gamma_prime.tolist(),
            "beta": self.beta.tolist(),
            "indirect": self.indirect.tolist(),
            "direct": self.direct.tolist(),
            "total": self.total.tolist(),
        }
        text = json.dumps(payload)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text


def _layout(cfg, rng):
    if cfg.layout == "uniform_random":
        return rng.uniform(0.0, 1.0, size=(cfg.n, 2))
    cols = math.ceil(math.sqrt(cfg.n))
    rows = math.ceil(cfg.n / cols)
    step = 1.0 / max(cols, rows)
    idx = np.arange(cfg.n)
    return np.column_stack([(idx % cols + 0.5) * step, (idx // cols + 0.5) * step])


def gen_synthetic(cfg: SynthConfig) -> tuple[Dataset, TruthBundle]:
    unit = _layout(cfg, _rng.stream(cfg.seed, 1))
    s, t = unit[:, 0], unit[:, 1]
    X = _rng.stream(cfg.seed, 2).standard_normal((cfg.n, cfg.p))
    e_m = _rng.stream(cfg.seed, 3).standard_normal(cfg.n) * cfg.noise_sd[0]
    e_y = _rng.stream(cfg.seed, 4).standard_normal(cfg.n) * cfg.noise_sd[1]

    med, out = cfg.fields()
    alpha = np.column_stack([f(s, t) for f in med])
    gamma_p = np.column_stack([f(s, t) for f in out])
    beta = cfg.mediator_effect(s, t)
    design = np.column_stack([np.ones(cfg.n), X])
    m = np.sum(design * alpha, axis=1) + e_m
    y = np.sum(design * gamma_p, axis=1) + beta * m + e_y

    names = tuple(f"x{j + 1}" for j in range(cfg.p))
    data = Dataset(coords=unit * cfg.extent, predictors=X, predictor_names=names,
                   mediator=m, outcome=y, mediator_name="M", outcome_name="y")
    return data, TruthBundle(alpha, gamma_p, beta, ("Intercept", *names))


def config_to_dict(cfg: SynthConfig):
    return asdict(cfg)


def config_from_dict(raw):
    raw = dict(raw)

    def fields_of(items):
        return tuple(Field(**f) if isinstance(f, dict) else f for f in items)

    for key in ("mediator_fields", "outcome_fields"):
        if key in raw:
            raw[key] = fields_of(raw[key])
    if isinstance(raw.get("mediator_effect"), dict):
        raw["mediator_effect"] = Field(**raw["mediator_effect"])
    if "noise_sd" in raw:
        ns = raw["noise_sd"]
        raw["noise_sd"] = (float(ns), float(ns)) if np.isscalar(ns) else tuple(ns)
    return SynthConfig(**raw)


def surface_rmse(truth, estimate, mask=None):
    """Root-mean-square error over entries where ``mask`` is true."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape:
        raise DimensionMismatch(f"shapes differ: {truth.shape} vs {estimate.shape}")
    if mask is None:
        mask = np.ones(truth.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != truth.shape:
        raise DimensionMismatch("mask shape differs from surfaces")
    if not mask.any():
        raise EmptyMask("no unmasked entries")
    diff = truth[mask] - estimate[mask]
    return float(np.sqrt(np.mean(diff * diff)))
