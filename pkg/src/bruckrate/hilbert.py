"""Finite-dimensional Hilbert space primitives and the operator catalog.

Points, bounded convex domains (boxes and balls), inner-product algebra, and
a small catalog of pseudocontractive self-maps together with empirical
pseudocontractivity / Lipschitz scanning.  Everything is immutable and pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np


class DimensionMismatchError(ValueError):
    pass


class DomainError(ValueError):
    pass


def as_vector(coords) -> np.ndarray:
    v = np.asarray(coords, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("a point is a nonempty 1-d coordinate vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("coordinates must be finite")
    v = v.copy()
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class Point:
    coords: np.ndarray

    def __init__(self, coords):
        object.__setattr__(self, "coords", as_vector(coords))

    @property
    def dim(self) -> int:
        return self.coords.size

    def __eq__(self, other):
        return isinstance(other, Point) and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())

    def __repr__(self):
        return f"Point({list(self.coords)})"


def inner(u: Point, v: Point) -> float:
    """Euclidean inner product; symmetric, bilinear, inner(u,u) = ||u||^2."""
    if u.dim != v.dim:
        raise DimensionMismatchError(f"dim {u.dim} vs {v.dim}")
    return float(np.dot(u.coords, v.coords))


def norm(u: Point) -> float:
    return math.sqrt(inner(u, u))


def distance(u: Point, v: Point) -> float:
    if u.dim != v.dim:
        raise DimensionMismatchError(f"dim {u.dim} vs {v.dim}")
    return float(np.linalg.norm(u.coords - v.coords))


@dataclass(frozen=True)
class DomainSpec:
    """A bounded closed convex domain: an axis-aligned box or a closed ball.

    diameter_bound is always >= the true diameter (box: 2*halfwidth*sqrt(dim),
    ball: 2*radius) and is the M fed to the rate functionals.
    """

    kind: str  # "box" | "ball"
    center: Point
    radius_or_halfwidth: float
    diameter_bound: Fraction = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.kind not in ("box", "ball"):
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if not (self.radius_or_halfwidth > 0):
            raise DomainError("radius/halfwidth must be positive")
        if self.diameter_bound is None:
            object.__setattr__(self, "diameter_bound", self._default_diameter_bound())
        elif Fraction(self.diameter_bound) < self._true_diameter_upper():
            raise DomainError("diameter_bound below the true diameter")

    def _true_diameter_upper(self) -> Fraction:
        r = Fraction(str(self.radius_or_halfwidth))
        if self.kind == "ball":
            return 2 * r
        # 2 * halfwidth * sqrt(dim), rounded up
        from .roundmath import pow_frac_up

        return 2 * r * pow_frac_up(Fraction(self.dim), Fraction(1, 2))

    def _default_diameter_bound(self) -> Fraction:
        d = self._true_diameter_upper()
        # keep M a small rational: round up to the next 1/64
        return Fraction(math.ceil(d * 64), 64)

    @property
    def dim(self) -> int:
        return self.center.dim

    def contains(self, x: Point, tol: float = 0.0) -> bool:
        if x.dim != self.dim:
            raise DimensionMismatchError(f"dim {x.dim} vs {self.dim}")
        d = x.coords - self.center.coords
        if self.kind == "box":
            return bool(np.max(np.abs(d)) <= self.radius_or_halfwidth + tol)
        return bool(np.linalg.norm(d) <= self.radius_or_halfwidth + tol)

    def escape_distance(self, x: Point) -> float:
        """How far x sits outside the domain (0 when inside)."""
        d = x.coords - self.center.coords
        if self.kind == "box":
            return max(0.0, float(np.max(np.abs(d))) - self.radius_or_halfwidth)
        return max(0.0, float(np.linalg.norm(d)) - self.radius_or_halfwidth)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n points uniform in the domain, shape (n, dim)."""
        if self.kind == "box":
            u = rng.uniform(-1.0, 1.0, size=(n, self.dim))
            return self.center.coords + self.radius_or_halfwidth * u
        g = rng.normal(size=(n, self.dim))
        g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
        r = rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / self.dim)
        return self.center.coords + self.radius_or_halfwidth * r * g

    def interval(self) -> tuple[float, float]:
        """The [lo, hi] interval of a 1-d domain."""
        if self.dim != 1:
            raise DomainError("interval() is for 1-d domains")
        c = float(self.center.coords[0])
        return c - self.radius_or_halfwidth, c + self.radius_or_halfwidth

    def to_config(self) -> dict:
        return {
            "kind": self.kind,
            "center": list(map(float, self.center.coords)),
            "radius_or_halfwidth": self.radius_or_halfwidth,
            "diameter_bound": str(self.diameter_bound),
        }

    @staticmethod
    def from_config(cfg: dict) -> "DomainSpec":
        m = cfg.get("diameter_bound")
        return DomainSpec(
            cfg["kind"],
            Point(cfg["center"]),
            float(cfg["radius_or_halfwidth"]),
            Fraction(m) if m is not None else None,
        )


def unit_box(dim: int = 1) -> DomainSpec:
    """The canonical box [-1, 1]^dim."""
    return DomainSpec("box", Point([0.0] * dim), 1.0)


def unit_ball(dim: int = 2) -> DomainSpec:
    return DomainSpec("ball", Point([0.0] * dim), 1.0)


@dataclass(frozen=True)
class OperatorSpec:
    """A self-map of a domain.

    Catalog kinds (all pseudocontractive):
      identity            T x = x
      cubic_decay         coordinatewise t -> t - t^3 on [-1, 1]^dim
      rotation            rotate coordinates (0, 1) by `angle`; isometry
      affine_nonexpansive T x = A x + b with operator norm of A <= 1
    The non-catalog kind `scale` (T x = factor * x) exists to inject
    misconfigurations: for factor > 1 it is not pseudocontractive.
    """

    kind: str
    angle: Optional[float] = None
    matrix: Optional[tuple] = None
    offset: Optional[tuple] = None
    factor: Optional[float] = None
    lipschitz_hint: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("identity", "cubic_decay", "rotation", "affine_nonexpansive", "scale"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "rotation" and self.angle is None:
            raise ValueError("rotation needs an angle")
        if self.kind == "scale" and self.factor is None:
            raise ValueError("scale needs a factor")
        if self.kind == "affine_nonexpansive":
            if self.matrix is None:
                raise ValueError("affine_nonexpansive needs a matrix")
            a = np.asarray(self.matrix, dtype=np.float64)
            if np.linalg.norm(a, ord=2) > 1.0 + 1e-12:
                raise ValueError("affine_nonexpansive matrix has operator norm > 1")

    def default_lipschitz(self) -> float:
        if self.lipschitz_hint is not None:
            return self.lipschitz_hint
        return {
            "identity": 1.0,
            "cubic_decay": 2.0,
            "rotation": 1.0,
            "affine_nonexpansive": 1.0,
            "scale": abs(self.factor) if self.factor is not None else 1.0,
        }[self.kind]

    def apply_array(self, x: np.ndarray) -> np.ndarray:
        """Apply to points stored row-wise (shape (..., dim))."""
        if self.kind == "identity":
            return np.array(x, copy=True)
        if self.kind == "cubic_decay":
            return x - x**3
        if self.kind == "scale":
            return self.factor * x
        if self.kind == "rotation":
            c, s = math.cos(self.angle), math.sin(self.angle)
            y = np.array(x, copy=True)
            y[..., 0] = c * x[..., 0] - s * x[..., 1]
            y[..., 1] = s * x[..., 0] + c * x[..., 1]
            return y
        a = np.asarray(self.matrix, dtype=np.float64)
        b = np.asarray(self.offset if self.offset is not None else np.zeros(a.shape[0]))
        return x @ a.T + b

    def scalar(self):
        """Fast scalar form for 1-d domains, or None."""
        if self.kind == "identity":
            return lambda t: t
        if self.kind == "cubic_decay":
            return lambda t: t - t * t * t
        if self.kind == "scale":
            f = self.factor
            return lambda t: f * t
        return None

    def to_config(self) -> dict:
        cfg = {"kind": self.kind}
        for k in ("angle", "factor", "lipschitz_hint"):
            v = getattr(self, k)
            if v is not None:
                cfg[k] = v
        if self.matrix is not None:
            cfg["matrix"] = [list(row) for row in self.matrix]
        if self.offset is not None:
            cfg["offset"] = list(self.offset)
        return cfg

    @staticmethod
    def from_config(cfg: dict) -> "OperatorSpec":
        return OperatorSpec(
            cfg["kind"],
            angle=cfg.get("angle"),
            matrix=tuple(map(tuple, cfg["matrix"])) if "matrix" in cfg else None,
            offset=tuple(cfg["offset"]) if "offset" in cfg else None,
            factor=cfg.get("factor"),
            lipschitz_hint=cfg.get("lipschitz_hint"),
        )


def catalog(dim: int = 1) -> list[tuple[OperatorSpec, DomainSpec]]:
    """The pseudocontractive catalog with matching domains."""
    ops = [
        (OperatorSpec("identity"), unit_box(dim)),
        (OperatorSpec("cubic_decay"), unit_box(dim)),
    ]
    if dim >= 2:
        ops.append((OperatorSpec("rotation", angle=0.7), unit_ball(dim)))
        a = np.eye(dim) * 0.9
        ops.append(
            (
                OperatorSpec(
                    "affine_nonexpansive",
                    matrix=tuple(map(tuple, a)),
                    offset=tuple([0.05] * dim),
                ),
                unit_box(dim),
            )
        )
    return ops


def apply(op: OperatorSpec, domain: DomainSpec, x: Point) -> Point:
    """Evaluate T at x; x must lie in the domain and so must the result."""
    if not domain.contains(x, tol=1e-12):
        raise DomainError(f"point {x} outside domain")
    y = Point(op.apply_array(x.coords))
    return y


def pseudocontractivity_scan(
    op: OperatorSpec, domain: DomainSpec, samples: int, seed: int
) -> float:
    """Max over sampled pairs (u, v) of <Tu - Tv, u - v> - ||u - v||^2.

    Nonpositive (up to roundoff) exactly when T behaves pseudocontractively
    on the sample.
    """
    if samples < 1:
        raise ValueError("samples >= 1 required")
    rng = np.random.default_rng(seed)
    u = domain.sample(rng, samples)
    v = domain.sample(rng, samples)
    tu = op.apply_array(u)
    tv = op.apply_array(v)
    duv = u - v
    gap = np.sum((tu - tv) * duv, axis=1) - np.sum(duv * duv, axis=1)
    return float(np.max(gap))


def self_mapping_scan(op: OperatorSpec, domain: DomainSpec, samples: int, seed: int) -> float:
    """Max escape distance of T(x) over sampled domain points (0 = self-map)."""
    rng = np.random.default_rng(seed)
    x = domain.sample(rng, samples)
    tx = op.apply_array(x)
    worst = 0.0
    for row in tx:
        worst = max(worst, domain.escape_distance(Point(row)))
    return worst


def lipschitz_estimate(op: OperatorSpec, domain: DomainSpec, samples: int, seed: int) -> float:
    """Max sampled ratio ||Tu - Tv|| / ||u - v||; a lower bound on the true
    Lipschitz constant.  Half the pairs are local (v close to u), which picks
    up the derivative where it is largest."""
    if samples < 1:
        raise ValueError("samples >= 1 required")
    rng = np.random.default_rng(seed)
    n_far = max(1, samples // 2)
    n_near = samples - n_far
    u = domain.sample(rng, n_far)
    v = domain.sample(rng, n_far)
    if n_near > 0:
        base = domain.sample(rng, n_near)
        step = rng.normal(size=base.shape)
        step /= np.maximum(np.linalg.norm(step, axis=1, keepdims=True), 1e-300)
        near = base + 1e-4 * domain.radius_or_halfwidth * step
        # project the nudged point back inside for box domains
        if domain.kind == "box":
            lo = domain.center.coords - domain.radius_or_halfwidth
            hi = domain.center.coords + domain.radius_or_halfwidth
            near = np.clip(near, lo, hi)
        else:
            d = near - domain.center.coords
            r = np.linalg.norm(d, axis=1, keepdims=True)
            scale = np.minimum(1.0, domain.radius_or_halfwidth / np.maximum(r, 1e-300))
            near = domain.center.coords + d * scale
        u = np.vstack([u, base])
        v = np.vstack([v, near])
    tu = op.apply_array(u)
    tv = op.apply_array(v)
    num = np.linalg.norm(tu - tv, axis=1)
    den = np.linalg.norm(u - v, axis=1)
    mask = den > 0
    if not np.any(mask):
        return 0.0
    return float(np.max(num[mask] / den[mask]))
