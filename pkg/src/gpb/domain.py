"""Constraint sets, their parameterizations, and quadrature on them.

A constraint set is either a finite list of points or a path made of
affine segments. Paths are parameterized over ``[a, b)`` at constant speed,
so the L2 measure on the set is arclength.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

__all__ = [
    "Segment",
    "FinitePoints",
    "ParameterizedPath",
    "QuadratureRule",
    "segment",
    "rect_boundary",
    "diagonal",
    "quadrature",
    "latin_hypercube",
    "constraint_set_from_dict",
    "QUADRATURE_RULES",
]

QUADRATURE_RULES = ("midpoint", "gauss_legendre", "left")


@dataclass(frozen=True, eq=False)
class Segment:
    """Affine map of ``[param_lo, param_hi)`` onto the segment ``start -> end``."""

    start: np.ndarray
    end: np.ndarray
    param_lo: float
    param_hi: float

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    @property
    def speed(self) -> float:
        return self.length / (self.param_hi - self.param_lo)

    def embed(self, u) -> np.ndarray:
        frac = (np.asarray(u, dtype=float) - self.param_lo) / (self.param_hi - self.param_lo)
        return self.start[None, :] + frac[:, None] * (self.end - self.start)[None, :]


@dataclass(frozen=True, eq=False)
class FinitePoints:
    points: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float)
        if P.ndim == 1:
            P = P.reshape(-1, 1)
        if P.ndim != 2 or P.shape[0] == 0:
            raise ValueError("FinitePoints needs a non-empty (n, d) array")
        object.__setattr__(self, "points", P)

    @property
    def ambient_dimension(self) -> int:
        return self.points.shape[1]

    def to_dict(self) -> dict:
        return {"variant": "finite", "params": {"points": self.points.tolist()}}


@dataclass(frozen=True, eq=False)
class ParameterizedPath:
    segments: tuple
    kind: str = "path"
    spec: dict | None = None

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("a path needs at least one segment")
        for a, b in zip(segs[:-1], segs[1:]):
            if not np.isclose(a.param_hi, b.param_lo, rtol=0, atol=1e-14):
                raise ValueError("segment parameter intervals must tile [a, b) in order")
        for s in segs:
            if s.param_hi <= s.param_lo or s.length <= 0:
                raise ValueError("degenerate segment")
        object.__setattr__(self, "segments", segs)

    @property
    def ambient_dimension(self) -> int:
        return self.segments[0].start.shape[0]

    @property
    def param_interval(self) -> tuple[float, float]:
        return self.segments[0].param_lo, self.segments[-1].param_hi

    @property
    def arclength(self) -> float:
        return float(sum(s.length for s in self.segments))

    @property
    def corners(self) -> np.ndarray:
        """Parameters at which consecutive segments join (plus the start)."""
        return np.array([s.param_lo for s in self.segments])

    def embed(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        lo, hi = self.param_interval
        if np.any(u < lo) or np.any(u >= hi):
            raise ValueError(f"parameters must lie in [{lo}, {hi})")
        out = np.empty((u.size, self.ambient_dimension))
        edges = np.array([s.param_hi for s in self.segments])
        which = np.searchsorted(edges, u, side="right")
        for i, seg in enumerate(self.segments):
            mask = which == i
            if np.any(mask):
                out[mask] = seg.embed(u[mask])
        return out

    def to_dict(self) -> dict:
        if self.spec is None:
            raise TypeError("only paths built by rect_boundary/diagonal/segment are serializable")
        return self.spec


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes, positive weights, and embedded node points.

    ``nodes`` holds path parameters, or is ``None`` for finite point sets.
    """

    nodes: np.ndarray | None
    weights: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if self.points.shape[0] != self.weights.shape[0]:
            raise ValueError("points and weights differ in length")
        if self.nodes is not None and self.nodes.shape[0] != self.weights.shape[0]:
            raise ValueError("nodes and weights differ in length")

    def __len__(self) -> int:
        return self.weights.shape[0]

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def _box(lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != (2,) or hi.shape != (2,):
        raise ValueError("lo and hi must be points in R^2")
    if np.any(hi <= lo):
        raise ValueError(f"degenerate rectangle: lo={lo.tolist()}, hi={hi.tolist()}")
    return lo, hi


def segment(start, end, param_interval=(-1.0, 1.0)) -> ParameterizedPath:
    """Straight path from ``start`` to ``end`` over ``param_interval``."""
    start = np.atleast_1d(np.asarray(start, dtype=float))
    end = np.atleast_1d(np.asarray(end, dtype=float))
    a, b = map(float, param_interval)
    spec = {
        "variant": "segment",
        "params": {"start": start.tolist(), "end": end.tolist(), "param_interval": [a, b]},
    }
    return ParameterizedPath((Segment(start, end, a, b),), kind="segment", spec=spec)


def rect_boundary(lo, hi) -> ParameterizedPath:
    """Counterclockwise boundary of the rectangle ``[lo, hi]``, from corner ``lo``.

    Parameterized over ``[-1, 1)`` with each edge's share of the interval
    proportional to its length, so the speed is constant.
    """
    lo, hi = _box(lo, hi)
    corners = [lo, np.array([hi[0], lo[1]]), hi, np.array([lo[0], hi[1]]), lo]
    lengths = np.array([np.linalg.norm(b - a) for a, b in zip(corners[:-1], corners[1:])])
    cuts = -1.0 + 2.0 * np.concatenate([[0.0], np.cumsum(lengths)]) / lengths.sum()
    cuts[-1] = 1.0
    segs = tuple(
        Segment(corners[i].copy(), corners[i + 1].copy(), float(cuts[i]), float(cuts[i + 1]))
        for i in range(4)
    )
    spec = {"variant": "rect_boundary", "params": {"lo": lo.tolist(), "hi": hi.tolist()}}
    return ParameterizedPath(segs, kind="rect_boundary", spec=spec)


def diagonal(lo, hi) -> ParameterizedPath:
    """The main diagonal ``lo -> hi`` of a rectangle, parameterized over ``[-1, 1)``."""
    lo, hi = _box(lo, hi)
    spec = {"variant": "diagonal", "params": {"lo": lo.tolist(), "hi": hi.tolist()}}
    return ParameterizedPath((Segment(lo, hi, -1.0, 1.0),), kind="diagonal", spec=spec)


def _allocate(n: int, shares: np.ndarray) -> np.ndarray:
    """Split ``n`` nodes across segments by largest remainder, at least one each."""
    raw = n * shares / shares.sum()
    counts = np.maximum(np.floor(raw).astype(int), 1)
    while counts.sum() > n:
        counts[np.argmax(counts)] -= 1
    order = np.argsort(-(raw - np.floor(raw)), kind="stable")
    i = 0
    while counts.sum() < n:
        counts[order[i % len(order)]] += 1
        i += 1
    return counts


def _unit_rule(n: int, rule: str) -> tuple[np.ndarray, np.ndarray]:
    """Nodes in [0, 1) and weights summing to 1."""
    if rule == "midpoint":
        return (np.arange(n) + 0.5) / n, np.full(n, 1.0 / n)
    if rule == "left":
        return np.arange(n) / n, np.full(n, 1.0 / n)
    if rule == "gauss_legendre":
        x, w = np.polynomial.legendre.leggauss(n)
        return (x + 1.0) / 2.0, w / 2.0
    raise ValueError(f"unknown quadrature rule {rule!r}; expected one of {QUADRATURE_RULES}")


def quadrature(cset, n_nodes: int, rule: str = "midpoint") -> QuadratureRule:
    """Quadrature rule realizing the arclength L2 inner product on ``cset``.

    Parameters
    ----------
    cset : FinitePoints or ParameterizedPath
    n_nodes : int
        Total node count; ignored for ``FinitePoints``, whose points become
        the nodes with unit weights.
    rule : {"midpoint", "gauss_legendre", "left"}
        Composite rule applied per segment. ``"left"`` (left endpoints) is
        nested under doubling of ``n_nodes`` on single-segment paths.
    """
    if n_nodes is None or int(n_nodes) < 1:
        raise ValueError(f"n_nodes must be a positive integer, got {n_nodes!r}")
    n_nodes = int(n_nodes)
    if isinstance(cset, FinitePoints):
        P = cset.points.copy()
        return QuadratureRule(None, np.ones(P.shape[0]), P)
    if rule not in QUADRATURE_RULES:
        raise ValueError(f"unknown quadrature rule {rule!r}; expected one of {QUADRATURE_RULES}")
    segs = cset.segments
    if n_nodes < len(segs):
        # too few nodes to give every segment one: a single rule over [a, b)
        a, b = cset.param_interval
        x, w = _unit_rule(n_nodes, rule)
        u = a + (b - a) * x
        speed = cset.arclength / (b - a)
        return QuadratureRule(u, w * (b - a) * speed, cset.embed(u))
    counts = _allocate(n_nodes, np.array([s.param_hi - s.param_lo for s in segs]))
    nodes, weights = [], []
    for seg, m in zip(segs, counts):
        x, w = _unit_rule(int(m), rule)
        nodes.append(seg.param_lo + (seg.param_hi - seg.param_lo) * x)
        weights.append(w * seg.length)
    u = np.concatenate(nodes)
    return QuadratureRule(u, np.concatenate(weights), cset.embed(u))


def latin_hypercube(M: int, d: int, seed: int) -> np.ndarray:
    """``M`` Latin-hypercube points in ``[-1, 1]^d``, deterministic in ``seed``."""
    if M < 1:
        raise ValueError("M must be at least 1")
    sampler = qmc.LatinHypercube(d=d, rng=np.random.default_rng(seed))
    return 2.0 * sampler.random(M) - 1.0


def constraint_set_from_dict(spec: dict):
    """Build a constraint set from ``{"variant": ..., "params": {...}}``."""
    try:
        variant = spec["variant"]
        params = spec.get("params", {})
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed constraint-set spec: {spec!r}") from exc
    if variant == "rect_boundary":
        return rect_boundary(params.get("lo", (-1, -1)), params.get("hi", (1, 1)))
    if variant == "diagonal":
        return diagonal(params.get("lo", (-1, -1)), params.get("hi", (1, 1)))
    if variant == "segment":
        return segment(params["start"], params["end"], params.get("param_interval", (-1, 1)))
    if variant == "finite":
        return FinitePoints(np.asarray(params["points"], dtype=float))
    raise ValueError(f"unknown constraint-set variant {variant!r}")
