"""Analytic model spacetimes: time separation, geodesics, volumes.

Three chart kinds on a rectangular chart with signature (+, -, ...):

* ``minkowski``: g = dt^2 - |dx|^2, any dimension; closed-form time separation;
* ``warped``: g = dt^2 - a(t)^2 dx^2 in 1+1 with a sampled smooth warp;
* ``lipschitz1p1``: same form but a(t) only Lipschitz (kinks allowed).

For the non-flat kinds the time separation is computed as a longest causal
path over a lattice: nodes on a uniform grid, jump fan of gcd-reduced integer
directions, edge lengths by 3-point Gauss quadrature of sqrt(g(gamma', gamma'))
along straight chart segments, edges discarded if the radicand goes negative
at any quadrature or endpoint node. The lattice value converges to l from
below under refinement; one Richardson step over two nested resolutions
cancels the leading linear error. An optional log-density weight (a function
of t) enters the measure, never the lengths.

The time separation convention: l(x, x) = 0, l(x, y) = -inf when y is not in
the causal future of x, and causal-but-not-chronological pairs get 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInputError, NoGeodesicError
from .extreal import NEG_INF

FAN_MAX_DEN = 16        # Farey density of the jump fan for slopes <= 1
FAN_WIDE_DEN = 8        # coarser density for slopes in (1, 2]
# 3-point Gauss-Legendre nodes on [0, 1] flanked by the endpoints; the
# endpoints take part in the causality check only
_QS = np.array([0.0, 0.5 - 0.5 * math.sqrt(0.6), 0.5, 0.5 + 0.5 * math.sqrt(0.6), 1.0])
_QW = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


@dataclass(frozen=True)
class Event:
    """A chart point; the first coordinate is time."""

    coords: tuple

    @property
    def t(self) -> float:
        return self.coords[0]

    @property
    def x(self) -> float:
        return self.coords[1]

    def __len__(self):
        return len(self.coords)


def event(*coords: float) -> Event:
    return Event(tuple(float(c) for c in coords))


def as_event(p) -> Event:
    if isinstance(p, Event):
        return p
    return Event(tuple(float(c) for c in p))


def _sample_curve(fn_or_samples, lo: float, hi: float, samples: int) -> np.ndarray:
    if callable(fn_or_samples):
        ts = np.linspace(lo, hi, samples)
        vals = np.asarray(fn_or_samples(ts), dtype=float)
        return np.column_stack([ts, vals])
    arr = np.asarray(fn_or_samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidInputError("sampled curve must be an (n, 2) array of [t, value]")
    return arr


@dataclass(frozen=True)
class ModelSpacetime:
    """Immutable chart-based model; see the module docstring for the kinds."""

    dim: int
    kind: str                       # "minkowski" | "warped" | "lipschitz1p1"
    bounds: tuple                   # ((t0, t1), (x0, x1), ...)
    warp_samples: np.ndarray | None = None      # [[t, a(t)], ...]
    weight_samples: np.ndarray | None = None    # [[t, f(t)], ...], f = log-density

    def __post_init__(self):
        if self.kind not in ("minkowski", "warped", "lipschitz1p1"):
            raise InvalidInputError(f"unknown kind {self.kind!r}")
        if self.dim < 2:
            raise InvalidInputError("need dimension >= 2")
        if len(self.bounds) != self.dim:
            raise InvalidInputError("bounds must list one (lo, hi) per axis")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise InvalidInputError("empty chart axis")
        if self.kind != "minkowski":
            if self.dim != 2:
                raise InvalidInputError("lattice kinds are implemented in 1+1 only")
            if self.warp_samples is None:
                raise InvalidInputError("warped kinds need warp samples")
            ws = np.asarray(self.warp_samples, dtype=float)
            object.__setattr__(self, "warp_samples", ws)
            if np.any(ws[:, 1] <= 0.0):
                raise InvalidInputError("warp must be strictly positive")
        if self.weight_samples is not None:
            object.__setattr__(self, "weight_samples",
                               np.asarray(self.weight_samples, dtype=float))

    def _key(self):
        return (self.dim, self.kind, self.bounds,
                None if self.warp_samples is None else self.warp_samples.tobytes(),
                None if self.weight_samples is None else self.weight_samples.tobytes())

    def __hash__(self):
        return hash(self._key())

    def __eq__(self, other):
        return isinstance(other, ModelSpacetime) and self._key() == other._key()

    # -- coefficient evaluation ------------------------------------------------

    def warp(self, t):
        if self.kind == "minkowski":
            return np.ones_like(np.asarray(t, dtype=float))
        return np.interp(t, self.warp_samples[:, 0], self.warp_samples[:, 1])

    def weight(self, t):
        if self.weight_samples is None:
            return np.zeros_like(np.asarray(t, dtype=float))
        return np.interp(t, self.weight_samples[:, 0], self.weight_samples[:, 1])

    def lipschitz_bound(self) -> float:
        """Recorded sup of finite-difference quotients of the coefficients."""
        out = 0.0
        for arr in (self.warp_samples, self.weight_samples):
            if arr is not None:
                out = max(out, float(np.max(np.abs(np.diff(arr[:, 1]) / np.diff(arr[:, 0])))))
        return out

    def contains(self, p: Event, tol: float = 1e-9) -> bool:
        return all(lo - tol <= c <= hi + tol
                   for c, (lo, hi) in zip(p.coords, self.bounds))

    def require_inside(self, *points: Event):
        for p in points:
            if len(p.coords) != self.dim:
                raise InvalidInputError("event dimension mismatch")
            if not self.contains(p):
                raise InvalidInputError(f"event {p.coords} outside the chart")

    # -- serialization ----------------------------------------------------------

    def to_json(self) -> str:
        data = {"dim": self.dim, "kind": self.kind,
                "bounds": [[lo, hi] for lo, hi in self.bounds]}
        if self.warp_samples is not None:
            key = "a" if self.kind == "lipschitz1p1" else "warp"
            data[key] = self.warp_samples.tolist()
        if self.weight_samples is not None:
            data["weight"] = self.weight_samples.tolist()
        return json.dumps(data)

    @classmethod
    def from_json(cls, text: str) -> "ModelSpacetime":
        d = json.loads(text)
        warp = d.get("warp", d.get("a"))
        return cls(int(d["dim"]), d["kind"],
                   tuple((float(lo), float(hi)) for lo, hi in d["bounds"]),
                   None if warp is None else np.asarray(warp, dtype=float),
                   None if "weight" not in d else np.asarray(d["weight"], dtype=float))


# -- constructors ---------------------------------------------------------------


def minkowski(bounds: Sequence = ((0.0, 1.0), (-1.0, 1.0)),
              weight: Callable | None = None, weight_samples: int = 1025) -> ModelSpacetime:
    bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
    ws = None
    if weight is not None:
        ws = _sample_curve(weight, bounds[0][0], bounds[0][1], weight_samples)
    return ModelSpacetime(len(bounds), "minkowski", bounds, None, ws)


def warped_product(warp, t_bounds, x_bounds, weight=None, samples: int = 2049,
                   kind: str = "warped") -> ModelSpacetime:
    t_bounds = (float(t_bounds[0]), float(t_bounds[1]))
    x_bounds = (float(x_bounds[0]), float(x_bounds[1]))
    wsamp = _sample_curve(warp, t_bounds[0], t_bounds[1], samples)
    weight_s = None if weight is None else _sample_curve(weight, *t_bounds, samples)
    return ModelSpacetime(2, kind, (t_bounds, x_bounds), wsamp, weight_s)


def lipschitz_1p1(a, t_bounds, x_bounds, weight=None, samples: int = 2049) -> ModelSpacetime:
    return warped_product(a, t_bounds, x_bounds, weight, samples, kind="lipschitz1p1")


def cosh_warp_model(t_half: float = 1.2, x_half: float = 1.2) -> ModelSpacetime:
    """Negatively curved warped slab a(t) = cosh t (timelike Ricci quotient -1)."""
    return warped_product(np.cosh, (-t_half, t_half), (-x_half, x_half))


def desitter_like(delta: float = 0.02, x_half: float = 1.0) -> ModelSpacetime:
    """Positively curved warped slab a(t) = cos t on |t| < pi/2 - delta.

    Normalized so the timelike Ricci quotient is +1 (Ric = -a''/a g on timelike
    directions with these index conventions): the sharp diameter comparison
    gives diam <= pi, approached as delta -> 0 by the comoving maximizers of
    length pi - 2 delta.
    """
    if not 0.0 < delta < math.pi / 4:
        raise InvalidInputError("delta out of range")
    half = math.pi / 2 - delta
    return warped_product(np.cos, (-half, half), (-x_half, x_half))


def kinked_slab(slope: float = 0.25) -> ModelSpacetime:
    """Lipschitz model a(t) = 1 - slope * |t| with a kink at t = 0."""
    return lipschitz_1p1(lambda t: 1.0 - slope * np.abs(t), (-1.0, 1.0), (-1.0, 1.0))


def double_cone_kink() -> ModelSpacetime:
    """A Lipschitz warp with an expensive spatial band around t = 0.

    Crossing in x is cheap near the slab ends and dear in the middle, so a
    symmetric chronological pair with spatial offset has two mirror-image
    maximizers: a witness for the multiple-maximizer flag.
    """
    return lipschitz_1p1(lambda t: 1.0 + 1.5 * np.clip(1.0 - np.abs(t) / 0.3, 0.0, None),
                         (-1.0, 1.0), (-1.0, 1.0))


# -- lattice machinery ----------------------------------------------------------


def _jump_fan():
    fan = [(1, 0)]
    for di in range(1, FAN_MAX_DEN + 1):
        for dj in range(1, di + 1):
            if math.gcd(di, dj) == 1:
                fan.append((di, dj))
                fan.append((di, -dj))
    for di in range(1, FAN_WIDE_DEN + 1):
        for dj in range(di + 1, 2 * di + 1):
            if math.gcd(di, dj) == 1:
                fan.append((di, dj))
                fan.append((di, -dj))
    return fan


_FAN = tuple(_jump_fan())


def _lattice_shape(model: ModelSpacetime, resolution: int):
    """Node counts (n_t, n_x) with comparable spacings along both axes."""
    (t0, t1), (x0, x1) = model.bounds
    n_x = max(4 * FAN_WIDE_DEN + 3,
              int(round((x1 - x0) / (t1 - t0) * (resolution - 1))) + 1)
    return resolution, n_x


def _fine_shape(shape):
    """The refinement whose nodes contain the given grid exactly."""
    return 2 * shape[0] - 1, 2 * shape[1] - 1


def _lattice_axes(model: ModelSpacetime, shape):
    (t0, t1), (x0, x1) = model.bounds
    return np.linspace(t0, t1, shape[0]), np.linspace(x0, x1, shape[1])


@lru_cache(maxsize=64)
def _edge_table(model: ModelSpacetime, shape):
    """Edge weights W[e, i] for a jump of type e leaving time index i.

    Weights depend on time only (the warp is a function of t); -inf marks
    edges that leave the chart or go spacelike at some quadrature node.
    """
    ts, xs = _lattice_axes(model, shape)
    dt = ts[1] - ts[0]
    dx = xs[1] - xs[0]
    n_t = len(ts)
    W = np.full((len(_FAN), n_t), -np.inf)
    for e, (di, dj) in enumerate(_FAN):
        imax = n_t - di
        if imax <= 0:
            continue
        tmat = ts[:imax, None] + _QS[None, :] * (di * dt)
        rad = (di * dt) ** 2 - (model.warp(tmat) * (dj * dx)) ** 2
        ok = np.all(rad >= -1e-15, axis=1)
        vals = np.sqrt(np.clip(rad[:, 1:4], 0.0, None)) @ _QW
        W[e, :imax] = np.where(ok, vals, -np.inf)
    return ts, xs, W


def _dp_longest(model: ModelSpacetime, shape, source: tuple | None):
    """Longest-path value to every node, from one source or (None) free start."""
    ts, xs, W = _edge_table(model, shape)
    n_t, n_x = len(ts), len(xs)
    if source is None:
        dist = np.zeros((n_t, n_x))
        start = 1
    else:
        dist = np.full((n_t, n_x), -np.inf)
        dist[source] = 0.0
        start = source[0] + 1
    buf = np.empty(n_x)
    for i in range(start, n_t):
        row = dist[i]
        for e, (di, dj) in enumerate(_FAN):
            ip = i - di
            if ip < 0 or (source is not None and ip < source[0]):
                continue
            w = W[e, ip]
            if w == -np.inf:
                continue
            prev = dist[ip]
            if dj == 0:
                np.maximum(row, prev + w, out=row)
            elif dj > 0:
                buf[:dj] = -np.inf
                np.add(prev[:-dj], w, out=buf[dj:])
                np.maximum(row, buf, out=row)
            else:
                buf[dj:] = -np.inf
                np.add(prev[-dj:], w, out=buf[:dj])
                np.maximum(row, buf, out=row)
    return ts, xs, dist


def _snap(ts: np.ndarray, xs: np.ndarray, p: Event):
    i = int(round((p.t - ts[0]) / (ts[1] - ts[0])))
    j = int(round((p.x - xs[0]) / (xs[1] - xs[0])))
    return (min(max(i, 0), len(ts) - 1), min(max(j, 0), len(xs) - 1))


def _null_reach(model: ModelSpacetime, t_a: float, t_b: float) -> float:
    """Maximal |x|-displacement of causal curves between two time slices."""
    tt = np.linspace(t_a, t_b, 1025)
    return float(np.trapezoid(1.0 / model.warp(tt), tt))


def causally_related(model: ModelSpacetime, x: Event, y: Event) -> bool:
    """Whether y lies in the causal future of x."""
    model.require_inside(x, y)
    if y.t < x.t:
        return False
    if model.kind == "minkowski":
        dt = y.t - x.t
        dxs = np.asarray(y.coords[1:]) - np.asarray(x.coords[1:])
        return dt + 1e-15 >= float(np.linalg.norm(dxs))
    return abs(y.x - x.x) <= _null_reach(model, x.t, y.t) + 1e-12


def time_separation(model: ModelSpacetime, x, y, resolution: int = 257,
                    richardson: bool = True) -> float:
    """Time separation l(x, y); -inf sentinel when y is not in J^+(x)."""
    x, y = as_event(x), as_event(y)
    model.require_inside(x, y)
    if x.coords == y.coords:
        return 0.0
    if model.kind == "minkowski":
        dt = y.t - x.t
        dxs = np.asarray(y.coords[1:]) - np.asarray(x.coords[1:])
        s2 = dt * dt - float(dxs @ dxs)
        if dt > 0.0 and s2 >= 0.0:
            return math.sqrt(s2)
        return NEG_INF
    # snap once on the coarse grid; the fine grid nests, so a coarse node
    # (i, j) is the fine node (2i, 2j) and both passes see the same pair
    shape = _lattice_shape(model, resolution)
    ts, xs = _lattice_axes(model, shape)
    src = _snap(ts, xs, x)
    tgt = _snap(ts, xs, y)
    if src == tgt:
        return 0.0
    sx = Event((float(ts[src[0]]), float(xs[src[1]])))
    sy = Event((float(ts[tgt[0]]), float(xs[tgt[1]])))
    if not causally_related(model, sx, sy):
        return NEG_INF
    vals = []
    shapes = [shape, _fine_shape(shape)] if richardson else [shape]
    for k, sh in enumerate(shapes):
        m = 2 ** k
        _, _, dist = _dp_longest(model, sh, (src[0] * m, src[1] * m))
        vals.append(float(dist[tgt[0] * m, tgt[1] * m]))
    if all(v == -np.inf for v in vals):
        return 0.0          # causal, but below the lattice's chronology resolution
    good = [v for v in vals if v != -np.inf]
    out = good[-1]
    if len(good) == 2:
        out = max(good[1], 2.0 * good[1] - good[0])
    return max(float(out), 0.0)


def lorentz_distance(model: ModelSpacetime, o) -> Callable[[Event], float]:
    """The function l_o = l(o, .); l_o(o) = 0."""
    o = as_event(o)

    def l_o(p):
        return time_separation(model, o, p)

    return l_o


def lorentz_distance_field(model: ModelSpacetime, o, resolution: int = 257,
                           richardson: bool = True):
    """l(o, .) on the whole lattice: (ts, xs, values with -inf sentinels).

    Nodes outside the causal future keep the sentinel; causal nodes are
    clamped to >= 0. Only for the lattice kinds.
    """
    o = as_event(o)
    model.require_inside(o)
    if model.kind == "minkowski":
        raise InvalidInputError("the flat-chart field is closed-form; no lattice needed")
    shape = _lattice_shape(model, resolution)
    src = _snap(*_lattice_axes(model, shape), o)
    ts, xs, dist_c = _dp_longest(model, shape, src)
    if not richardson:
        field = dist_c.copy()
    else:
        ts, xs, dist_f = _dp_longest(model, _fine_shape(shape), (2 * src[0], 2 * src[1]))
        field = dist_f.copy()
        # extrapolate at the nodes shared by both grids, where both see a path
        sub = dist_f[::2, ::2]
        both = (sub > -np.inf) & (dist_c > -np.inf)
        ext = np.maximum(sub[both], 2.0 * sub[both] - dist_c[both])
        shared = field[::2, ::2]
        shared[both] = ext
        field[::2, ::2] = shared
    pos = field > -np.inf
    field[pos] = np.maximum(field[pos], 0.0)
    return ts, xs, field


@dataclass(frozen=True)
class LatticePath:
    """A maximizing lattice path with its cumulative lengths."""

    nodes: np.ndarray          # (k, 2) events along the path
    cumlen: np.ndarray         # (k,) cumulative length from the start
    length: float
    multiple_maximizers: bool


def _backtrack(ts, xs, W, dist, source, target, prefer_last: bool = False):
    path = [target]
    cur = target
    rel = 1e-9 * max(1.0, abs(float(dist[target])))
    while cur != source:
        best = None
        for e, (di, dj) in enumerate(_FAN):
            ip, jp = cur[0] - di, cur[1] - dj
            if ip < source[0] or not 0 <= jp < len(xs):
                continue
            w = W[e, ip]
            if w == -np.inf or dist[ip, jp] == -np.inf:
                continue
            if abs(dist[ip, jp] + w - dist[cur]) <= rel:
                best = (ip, jp)
                if not prefer_last:
                    break
        if best is None:
            raise NoGeodesicError("backtracking lost the maximizing path")
        path.append(best)
        cur = best
    path.reverse()
    return path


def maximizing_path(model: ModelSpacetime, x, y, resolution: int = 513) -> LatticePath:
    """Longest lattice path between the snapped endpoints, with a conservative
    multiple-maximizer flag: raised when two tied-within-1e-6 incoming edges at
    the target backtrack to paths that differ in their interior nodes."""
    x, y = as_event(x), as_event(y)
    model.require_inside(x, y)
    if model.kind == "minkowski":
        raise InvalidInputError("flat-chart geodesics are straight; no lattice needed")
    shape = _lattice_shape(model, resolution)
    ts, xs, W = _edge_table(model, shape)
    source = _snap(ts, xs, x)
    target = _snap(ts, xs, y)
    _, _, dist = _dp_longest(model, shape, source)
    if dist[target] == -np.inf or dist[target] <= 0.0:
        raise NoGeodesicError("endpoints are not chronologically related on the lattice")

    first = _backtrack(ts, xs, W, dist, source, target)
    second = _backtrack(ts, xs, W, dist, source, target, prefer_last=True)
    # tie detection at the target: two distinct predecessors within 1e-6
    ties = []
    for e, (di, dj) in enumerate(_FAN):
        ip, jp = target[0] - di, target[1] - dj
        if ip < source[0] or not 0 <= jp < len(xs):
            continue
        w = W[e, ip]
        if w == -np.inf or dist[ip, jp] == -np.inf:
            continue
        if dist[ip, jp] + w >= dist[target] - 1e-6:
            ties.append((ip, jp))
    multiple = len(set(ties)) >= 2 and first[:-1] != second[:-1]

    nodes = np.array([[ts[i], xs[j]] for i, j in first])
    seg = np.zeros(len(first))
    for k in range(1, len(first)):
        i0, j0 = first[k - 1]
        i1, j1 = first[k]
        e = _FAN.index((i1 - i0, j1 - j0))
        seg[k] = W[e, i0]
    return LatticePath(nodes, np.cumsum(seg), float(dist[target]), multiple)


def geodesic_point(model: ModelSpacetime, x, y, t: float, resolution: int = 513) -> Event:
    """A point gamma_t on a maximizing geodesic, affinely parametrized:
    l(x, gamma_t) = t l(x, y) up to lattice tolerance."""
    x, y = as_event(x), as_event(y)
    if not 0.0 <= t <= 1.0:
        raise InvalidInputError("t outside [0, 1]")
    if model.kind == "minkowski":
        l = time_separation(model, x, y)
        if l == NEG_INF or l <= 0.0:
            raise NoGeodesicError("endpoints are not chronologically related")
        return Event(tuple((1 - t) * a + t * b for a, b in zip(x.coords, y.coords)))
    path = maximizing_path(model, x, y, resolution)
    want = t * path.length
    k = int(np.searchsorted(path.cumlen, want, side="right")) - 1
    k = min(max(k, 0), len(path.cumlen) - 2)
    seg = path.cumlen[k + 1] - path.cumlen[k]
    frac = 0.0 if seg <= 0.0 else (want - path.cumlen[k]) / seg
    p = (1 - frac) * path.nodes[k] + frac * path.nodes[k + 1]
    return Event(tuple(float(c) for c in p))


# -- measures and volumes ---------------------------------------------------------


def _density_rows(model: ModelSpacetime, t_row: float, x_centers: np.ndarray):
    base = float(model.warp(t_row)) if model.kind != "minkowski" else 1.0
    return base * math.exp(-float(model.weight(t_row))) * np.ones_like(x_centers)


def region_measure(model: ModelSpacetime, region: Callable[[np.ndarray], np.ndarray],
                   resolution: int = 1024) -> float:
    """Midpoint-rule measure of a region: exp(-weight) sqrt|det g| summed over
    cell centers where ``region`` holds.

    ``region`` maps an (..., dim) coordinate array to a boolean mask.
    Implemented for 1+1 charts (all lattice models, and flat charts of any
    width in the spatial axis).
    """
    if model.dim != 2:
        raise InvalidInputError("region integration is implemented in 1+1 only")
    (t0, t1), (x0, x1) = model.bounds
    ht = (t1 - t0) / resolution
    hx = (x1 - x0) / resolution
    t_centers = t0 + ht * (np.arange(resolution) + 0.5)
    x_centers = x0 + hx * (np.arange(resolution) + 0.5)
    total = 0.0
    chunk = max(1, int(2e6) // resolution)
    pts = np.empty((chunk, resolution, 2))
    for lo in range(0, resolution, chunk):
        hi = min(lo + chunk, resolution)
        m = hi - lo
        pts[:m, :, 0] = t_centers[lo:hi, None]
        pts[:m, :, 1] = x_centers[None, :]
        mask = np.asarray(region(pts[:m]), dtype=bool)
        dens = model.warp(t_centers[lo:hi]) if model.kind != "minkowski" \
            else np.ones(m)
        dens = dens * np.exp(-model.weight(t_centers[lo:hi]))
        total += float(np.sum(mask * dens[:, None]))
    return total * ht * hx


def _assert_star_shaped(model: ModelSpacetime, o: Event,
                        region: Callable[[np.ndarray], np.ndarray], rays: int = 64):
    """Sample rays from o, locate the far boundary, and check that the
    intermediate points stay in the region (straight chart segments stand in
    for geodesics; exact in the flat case)."""
    (t0, t1), (x0, x1) = model.bounds
    span = math.hypot(t1 - t0, x1 - x0)
    angles = np.linspace(0.0, 2.0 * math.pi, rays, endpoint=False)
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    rr = np.linspace(1e-6, span, 256)
    pts = o.coords + rr[None, :, None] * dirs[:, None, :]
    inside = np.asarray(region(pts), dtype=bool)
    inside &= (pts[..., 0] >= t0) & (pts[..., 0] <= t1) \
        & (pts[..., 1] >= x0) & (pts[..., 1] <= x1)
    for k in range(rays):
        hit = np.nonzero(inside[k])[0]
        if len(hit) == 0:
            continue
        # along each sampled geodesic: the region must be entered at the apex
        # and left exactly once
        if hit[0] > 2 or np.any(np.diff(hit) != 1):
            raise InvalidInputError("region is not star-shaped about the apex")


def ball_volume_area(model: ModelSpacetime, o, r: float,
                     region: Callable[[np.ndarray], np.ndarray],
                     dr: float = 0.01, resolution: int = 1024,
                     check_star_shaped: bool = True):
    """Ball volume v(r) = m[region and {0 <= l_o <= r}] and the difference
    quotient area s(r) = (v(r + dr) - v(r)) / dr."""
    o = as_event(o)
    model.require_inside(o)
    if r <= 0.0:
        raise InvalidInputError("need r > 0")
    if check_star_shaped:
        _assert_star_shaped(model, o, region)

    if model.kind == "minkowski":
        def l_of(pts):
            dt = pts[..., 0] - o.t
            dx = pts[..., 1] - o.x
            s2 = dt * dt - dx * dx
            out = np.where((dt > 0) & (s2 >= 0), np.sqrt(np.clip(s2, 0, None)), -np.inf)
            return np.where((dt == 0) & (dx == 0), 0.0, out)
    else:
        ts, xs, field = lorentz_distance_field(model, o)

        def l_of(pts):
            ii = np.clip((pts[..., 0] - ts[0]) / (ts[1] - ts[0]), 0, len(ts) - 1)
            jj = np.clip((pts[..., 1] - xs[0]) / (xs[1] - xs[0]), 0, len(xs) - 1)
            return field[np.round(ii).astype(int), np.round(jj).astype(int)]

    def ball(pts, radius):
        l = l_of(pts)
        return region(pts) & (l >= 0.0) & (l <= radius)

    v0 = region_measure(model, lambda p: ball(p, r), resolution)
    v1 = region_measure(model, lambda p: ball(p, r + dr), resolution)
    return v0, (v1 - v0) / dr


def ball_volume_profile(model: ModelSpacetime, o, radii: Sequence[float],
                        region: Callable[[np.ndarray], np.ndarray],
                        resolution: int = 1024) -> np.ndarray:
    """v(r) for several radii with one sweep (shared l_o evaluations)."""
    o = as_event(o)
    vs = []
    for r in radii:
        v, _ = ball_volume_area(model, o, r, region, dr=1e-3,
                                resolution=resolution, check_star_shaped=False)
        vs.append(v)
    return np.asarray(vs)


def timelike_diameter(model: ModelSpacetime, resolution: int = 257,
                      richardson: bool = True) -> float:
    """Sup of the time separation over chart pairs (lattice lower estimate)."""
    (t0, t1) = model.bounds[0]
    if model.kind == "minkowski":
        return t1 - t0          # attained by any constant-space pair
    shape = _lattice_shape(model, resolution)
    _, _, d_c = _dp_longest(model, shape, None)
    best = float(np.max(d_c))
    if richardson:
        _, _, d_f = _dp_longest(model, _fine_shape(shape), None)
        fine = float(np.max(d_f))
        best = max(fine, 2.0 * fine - best)
    return max(best, 0.0)
