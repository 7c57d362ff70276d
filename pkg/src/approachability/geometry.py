"""Closed convex targets: distance, projection, membership and facets.

Every target accepts a single point of shape ``(d,)`` or a batch of shape
``(n, d)`` in :meth:`distance` and :meth:`project`.
"""

from __future__ import annotations

import json
from functools import cached_property

import numpy as np

from .game import GameFormatError, HPolytope, load_json
from .qp import active_set_qp

MEMBER_TOL = 1e-10


class UnsupportedTargetError(TypeError):
    """Operation not defined for this kind of target."""


class ConvexTarget:
    """Base class for the target sets C."""

    kind = "abstract"
    dim: int

    def project(self, z) -> np.ndarray:
        raise NotImplementedError

    def distance(self, z):
        z = np.asarray(z, dtype=float)
        d = np.sqrt(((z - self.project(z)) ** 2).sum(axis=-1))
        return float(d) if d.ndim == 0 else d

    def contains(self, z, tol: float = MEMBER_TOL):
        d = self.distance(z)
        return d <= tol

    def facets(self) -> list[tuple[np.ndarray, float]]:
        raise UnsupportedTargetError(f"{self.kind} targets have no finite facet list")

    @property
    def polyhedral(self) -> bool:
        return True

    def delta_complement(self, delta: float) -> DeltaComplement:
        return DeltaComplement(self, delta)

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _check(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.dim:
            raise ValueError(f"point of dimension {z.shape[-1]} for a target in R^{self.dim}")
        return z


class HalfSpace(ConvexTarget):
    """{z : <a, z> <= b}."""

    kind = "halfspace"

    def __init__(self, a, b: float):
        self.a = np.atleast_1d(np.asarray(a, dtype=float))
        self.b = float(b)
        self.dim = self.a.shape[0]
        if not np.linalg.norm(self.a) > 0:
            raise ValueError("half-space normal must be nonzero")
        self._norm2 = float(self.a @ self.a)

    def project(self, z):
        z = self._check(z)
        excess = np.maximum(z @ self.a - self.b, 0.0)
        return z - np.multiply.outer(excess / self._norm2, self.a)

    def distance(self, z):
        z = self._check(z)
        d = np.maximum(z @ self.a - self.b, 0.0) / np.sqrt(self._norm2)
        return float(d) if np.ndim(d) == 0 else d

    def facets(self):
        return [(self.a.copy(), self.b)]

    def to_dict(self):
        return {"type": "halfspace", "a": self.a.tolist(), "b": self.b}

    def __repr__(self):
        return f"HalfSpace(a={self.a.tolist()}, b={self.b})"


class Box(ConvexTarget):
    """Axis-aligned box; infinite bounds are allowed (an orthant, R^d, ...)."""

    kind = "box"

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValueError("box bounds must be vectors of equal length")
        if np.any(self.lo > self.hi) or np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            raise ValueError("box needs lo <= hi componentwise")
        self.dim = self.lo.shape[0]

    def project(self, z):
        return np.clip(self._check(z), self.lo, self.hi)

    def facets(self):
        out = []
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = 1.0
            if np.isfinite(self.lo[k]):
                out.append((-e, -self.lo[k]))
            if np.isfinite(self.hi[k]):
                out.append((e.copy(), self.hi[k]))
        return out

    def to_dict(self):
        enc = lambda v: [x if np.isfinite(x) else ("inf" if x > 0 else "-inf") for x in v.tolist()]
        return {"type": "box", "lo": enc(self.lo), "hi": enc(self.hi)}

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


class Ball(ConvexTarget):
    kind = "ball"

    def __init__(self, center, radius: float):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)
        if self.radius < 0:
            raise ValueError("ball radius must be nonnegative")
        self.dim = self.center.shape[0]

    @property
    def polyhedral(self):
        return False

    def project(self, z):
        z = self._check(z)
        off = z - self.center
        norm = np.sqrt((off ** 2).sum(axis=-1, keepdims=True))
        scale = np.where(norm > self.radius, self.radius / np.maximum(norm, 1e-300), 1.0)
        return self.center + off * scale

    def distance(self, z):
        z = self._check(z)
        d = np.maximum(np.sqrt(((z - self.center) ** 2).sum(axis=-1)) - self.radius, 0.0)
        return float(d) if np.ndim(d) == 0 else d

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


class Polytope(ConvexTarget):
    """Bounded nonempty {z : A z <= b}; vertices are cached on first use."""

    kind = "polytope"

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("polytope A and b disagree on the number of constraints")
        self.dim = self.A.shape[1]
        norms = np.linalg.norm(self.A, axis=1)
        if np.any(norms == 0):
            raise ValueError("polytope has a zero constraint row")
        if not self.vertices.shape[0]:
            raise ValueError("polytope is empty")

    @cached_property
    def vertices(self) -> np.ndarray:
        from .solvers import enumerate_vertices

        verts = enumerate_vertices(HPolytope.from_arrays(self.dim, A_ub=self.A, b_ub=self.b))
        return np.array(verts).reshape(-1, self.dim)

    def _project_one(self, z):
        if np.all(self.A @ z <= self.b + 1e-12):
            return z.copy()
        start = self.vertices[np.argmin(((self.vertices - z) ** 2).sum(axis=1))]
        p = active_set_qp(np.eye(self.dim), -z, A_ub=self.A, b_ub=self.b, x0=start)
        return p

    def project(self, z):
        z = self._check(z)
        if z.ndim == 1:
            return self._project_one(z)
        return np.stack([self._project_one(row) for row in z.reshape(-1, self.dim)]).reshape(z.shape)

    def facets(self):
        """Irredundant inequalities: rows that are tight on at least dim affinely independent vertices."""
        out = []
        V = self.vertices
        for a, b in zip(self.A, self.b):
            tight = V[np.abs(V @ a - b) <= 1e-9]
            if len(tight) and np.linalg.matrix_rank(
                    np.hstack([tight, np.ones((len(tight), 1))]), tol=1e-9) >= self.dim:
                if not any(np.allclose(a / np.linalg.norm(a), f / np.linalg.norm(f)) and
                           np.isclose(b / np.linalg.norm(a), g / np.linalg.norm(f)) for f, g in out):
                    out.append((a.copy(), float(b)))
        return out

    def to_dict(self):
        return {"type": "polytope", "A": self.A.tolist(), "b": self.b.tolist()}

    def __repr__(self):
        return f"Polytope({self.A.shape[0]} constraints in R^{self.dim})"


class DeltaComplement:
    """Closure of the complement of the delta-neighborhood of C.

    Its distance function is max(0, delta - d_C(z)).
    """

    def __init__(self, base: ConvexTarget, delta: float):
        if not delta > 0:
            raise ValueError("delta must be positive")
        self.base = base
        self.delta = float(delta)
        self.dim = base.dim

    def distance(self, z):
        d = np.maximum(self.delta - np.asarray(self.base.distance(z)), 0.0)
        return float(d) if np.ndim(d) == 0 else d

    def contains(self, z, tol: float = MEMBER_TOL):
        return self.distance(z) <= tol


def target_from_dict(data: dict) -> ConvexTarget:
    if not isinstance(data, dict) or "type" not in data:
        raise GameFormatError("target must be an object with a 'type' field")

    def num(key, vec=True):
        if key not in data:
            raise GameFormatError(f"target of type {data['type']!r} is missing field {key!r}")
        try:
            val = np.asarray(data[key], dtype=float)
        except (TypeError, ValueError) as exc:
            raise GameFormatError(f"target field {key!r}: {exc}") from exc
        return val if vec else float(val)

    kind = data["type"].lower()
    try:
        if kind == "halfspace":
            return HalfSpace(num("a"), num("b", vec=False))
        if kind == "box":
            return Box(num("lo"), num("hi"))
        if kind == "interval":
            return Box([num("lo", vec=False)], [num("hi", vec=False)])
        if kind == "ball":
            return Ball(num("center"), num("radius", vec=False))
        if kind == "polytope":
            return Polytope(num("A"), num("b"))
    except ValueError as exc:
        raise GameFormatError(f"invalid {kind} target: {exc}") from exc
    raise GameFormatError(f"unknown target type {data['type']!r}")


def load_target(path) -> ConvexTarget:
    return target_from_dict(load_json(path))


def dump_target(target: ConvexTarget) -> str:
    return json.dumps(target.to_dict())
