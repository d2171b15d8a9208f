"""Radial grids, profiles, and the calculus they support.

Everything downstream (conformal construction, elliptic solves,
verification) works with scalar functions of the radius sampled on a
shared grid.  This module owns that representation:

* graded grids on [0, r_max] with a uniform head near the origin and a
  geometrically stretched tail,
* high-order finite differences with even reflection across r = 0,
* composite polynomial quadrature, cumulative and improper,
* power-law tail fits used for remainders and decay diagnostics,
* a small CSV exchange format (``r,value``).
"""

from __future__ import annotations

import dataclasses
from fractions import Fraction

import numpy as np
import scipy.sparse

from .errors import (
    DegenerateFitError,
    EvaluationOutOfRangeError,
    InvalidArgumentError,
    NoTailError,
    ProfileParseError,
    SchemaError,
    TailTooSlowError,
)

__all__ = [
    "Dimension",
    "RadialGrid",
    "RadialProfile",
    "TailModel",
    "build_grid",
    "differentiate",
    "integrate_from_zero",
    "integrate_to_infinity",
    "fit_tail",
    "write_profile_csv",
    "read_profile_csv",
]

_STENCIL = 7  # interior stencil width; order 6 (d/dr) and 5 (d2/dr2)
_QUAD_STENCIL = 5  # nodes per interval integral; exact through degree 4


@dataclasses.dataclass(frozen=True)
class Dimension:
    """Spatial dimension n >= 3 with the derived conformal exponent.

    The exponent N = 2n/(n-2) is kept exact (n = 3 gives N = 6); use
    ``float(dim.N)`` in floating-point formulas.
    """

    n: int

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 3:
            raise InvalidArgumentError(f"spatial dimension must be an integer >= 3, got {self.n!r}")

    @property
    def N(self) -> Fraction:
        return Fraction(2 * self.n, self.n - 2)


class RadialGrid:
    """Strictly increasing nodes 0 = r_0 < r_1 < ... < r_max.

    Instances are immutable and cache their differentiation and
    quadrature operators; profiles refer to grids by identity.
    """

    def __init__(self, nodes: np.ndarray, stretch: float | None = None):
        nodes = np.ascontiguousarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise InvalidArgumentError("grid needs a 1-D array of at least two nodes")
        if not np.all(np.isfinite(nodes)):
            raise InvalidArgumentError("grid nodes must be finite")
        if nodes[0] != 0.0:
            raise InvalidArgumentError("first grid node must be exactly 0")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidArgumentError("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        self.nodes = nodes
        if stretch is None:
            h = np.diff(nodes)
            stretch = float(max(1.0, (h[1:] / h[:-1]).max())) if h.size > 1 else 1.0
        self.stretch = float(stretch)
        self._cache: dict = {}

    def __len__(self) -> int:
        return self.nodes.size

    def __repr__(self) -> str:
        return f"RadialGrid({len(self)} nodes, r_max={self.r_max:g})"

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.nodes)

    # -- cached operators -------------------------------------------------

    def derivative_matrix(self, order: int) -> scipy.sparse.csr_matrix:
        key = ("deriv", order)
        if key not in self._cache:
            d1, d2 = _build_derivative_matrices(self.nodes)
            self._cache[("deriv", 1)] = d1
            self._cache[("deriv", 2)] = d2
        return self._cache[key]

    def _quadrature(self):
        if "quad" not in self._cache:
            self._cache["quad"] = _build_quadrature(self.nodes)
        return self._cache["quad"]


@dataclasses.dataclass(frozen=True)
class TailModel:
    """Power-law model ``coefficient * r**-exponent`` fitted on a window.

    ``coefficient`` is signed; a negative ``exponent`` describes growth.
    ``misfit`` is the pointwise relative sup error over the fit window.
    """

    coefficient: float
    exponent: float
    window: tuple[float, float]
    misfit: float

    def at(self, r):
        return self.coefficient * np.asarray(r, dtype=float) ** (-self.exponent)

    def derivative_at(self, r):
        r = np.asarray(r, dtype=float)
        return -self.exponent * self.coefficient * r ** (-self.exponent - 1.0)

    def second_derivative_at(self, r):
        r = np.asarray(r, dtype=float)
        return self.exponent * (self.exponent + 1.0) * self.coefficient * r ** (-self.exponent - 2.0)


@dataclasses.dataclass(frozen=True, eq=False)
class RadialProfile:
    """Samples of a radial function on a grid, plus an optional tail model."""

    grid: RadialGrid
    values: np.ndarray
    tail: TailModel | None = None

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise InvalidArgumentError(
                f"profile has {values.size} values for a grid of {len(self.grid)} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("profile values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def with_tail(self, tail: TailModel | None) -> "RadialProfile":
        return RadialProfile(self.grid, self.values, tail)

    def at(self, radii):
        """Evaluate by local cubic interpolation; use the tail beyond r_max.

        Raises EvaluationOutOfRangeError past the grid when no tail
        model is attached.
        """
        radii_arr = np.atleast_1d(np.asarray(radii, dtype=float))
        if np.any(radii_arr < 0):
            raise InvalidArgumentError("radii must be nonnegative")
        out = np.empty_like(radii_arr)
        r_max = self.grid.r_max
        # tolerate roundoff from norms of points nominally on the boundary
        inside = radii_arr <= r_max * (1.0 + 1e-12)
        if np.any(~inside):
            if self.tail is None:
                worst = float(radii_arr[~inside].max())
                raise EvaluationOutOfRangeError(
                    f"evaluation at r={worst:g} beyond r_max={r_max:g} without a tail model"
                )
            out[~inside] = self.tail.at(radii_arr[~inside])
        if np.any(inside):
            out[inside] = _interp_cubic(self.grid.nodes, self.values, np.minimum(radii_arr[inside], r_max))
        if np.isscalar(radii) or np.asarray(radii).ndim == 0:
            return float(out[0])
        return out


# ---------------------------------------------------------------------------
# grid construction


def build_grid(n_points: int, r_max: float, stretch: float = 1.0) -> RadialGrid:
    """Graded grid on [0, r_max]: uniform head, geometric tail.

    ``stretch`` bounds the ratio of adjacent spacings.  For stretch = 1 the
    grid is uniform.  Otherwise the tail nodes follow r_t * rho**i with a
    node ratio rho <= stretch, and the number of uniform head cells is
    chosen so the spacing is continuous at the seam and the head covers
    radius ~1 (the inner scale; r_max must exceed it).
    """
    if not isinstance(n_points, (int, np.integer)) or n_points < 64:
        raise InvalidArgumentError(f"need at least 64 grid points, got {n_points!r}")
    if not r_max > 1.0:
        raise InvalidArgumentError(f"r_max must exceed 1, got {r_max!r}")
    if not stretch >= 1.0:
        raise InvalidArgumentError(f"stretch must be >= 1, got {stretch!r}")

    intervals = int(n_points) - 1
    if stretch == 1.0:
        return RadialGrid(np.linspace(0.0, r_max, n_points), stretch=1.0)

    # Tail of K_g geometric intervals with node ratio rho = 1 + 1/K_u makes
    # the first tail spacing equal the head spacing exactly.  Pick the split
    # whose head radius r_t = r_max * rho**-K_g is closest to 1.
    k_tail = np.arange(1, intervals)
    k_head = intervals - k_tail
    rho = 1.0 + 1.0 / k_head
    feasible = rho <= stretch * (1.0 + 1e-12)
    if not np.any(feasible):
        return RadialGrid(np.linspace(0.0, r_max, n_points), stretch=stretch)
    log_rt = np.log(r_max) - k_tail * np.log1p(1.0 / k_head)
    log_rt[~feasible] = np.inf
    pick = int(np.argmin(np.abs(log_rt)))
    kg = int(k_tail[pick])
    ku = int(k_head[pick])
    rt = float(np.exp(log_rt[pick]))

    head = np.linspace(0.0, rt, ku + 1)
    tail = rt * (1.0 + 1.0 / ku) ** np.arange(1, kg + 1, dtype=float)
    nodes = np.concatenate([head, tail])
    nodes[-1] = r_max
    return RadialGrid(nodes, stretch=stretch)


# ---------------------------------------------------------------------------
# finite differences


def _fornberg_weights(x: np.ndarray, x0: float, max_order: int) -> np.ndarray:
    """Weights for derivatives 0..max_order at x0 on arbitrary nodes x.

    Fornberg's recursion; returns an array of shape (len(x), max_order+1).
    """
    npts = len(x)
    c = np.zeros((npts, max_order + 1))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, max_order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def _build_derivative_matrices(nodes: np.ndarray):
    """First- and second-derivative matrices with even reflection at r=0.

    Odd-order stencils near the origin use ghost nodes at -r_k carrying the
    value at +r_k, so the row for d/dr at r=0 vanishes identically.  Rows
    are re-normalized so derivatives of constants are exactly zero.
    """
    npts = nodes.size
    width = _STENCIL if npts >= _STENCIL else 5
    if npts < 5:
        raise InvalidArgumentError("differentiation needs at least 5 nodes")
    half = width // 2

    rows, cols, vals1, vals2 = [], [], [], []
    for i in range(npts):
        if i < half:
            offsets = np.arange(i - half, i + half + 1)
            positions = np.where(offsets >= 0, nodes[np.abs(offsets)], -nodes[np.abs(offsets)])
            columns = np.abs(offsets)
            center = int(np.where(offsets == i)[0][0])
        else:
            start = min(max(i - half, 0), npts - width)
            columns = np.arange(start, start + width)
            positions = nodes[columns]
            center = i - start
        w = _fornberg_weights(positions, nodes[i], 2)
        w1 = w[:, 1].copy()
        w2 = w[:, 2].copy()
        w1[center] -= w1.sum()
        w2[center] -= w2.sum()
        rows.extend([i] * len(columns))
        cols.extend(columns.tolist())
        vals1.extend(w1.tolist())
        vals2.extend(w2.tolist())

    shape = (npts, npts)
    d1 = scipy.sparse.coo_matrix((vals1, (rows, cols)), shape=shape).tocsr()
    d2 = scipy.sparse.coo_matrix((vals2, (rows, cols)), shape=shape).tocsr()
    # d/dr of a smooth even profile vanishes at the origin
    d1 = scipy.sparse.lil_matrix(d1)
    d1[0, :] = 0.0
    return d1.tocsr(), d2


def differentiate(profile: RadialProfile, order: int = 1) -> RadialProfile:
    """Derivative of the given order (1 or 2) on the profile's grid.

    The constant mode is removed before applying the stencil so constant
    profiles differentiate to exactly zero.
    """
    if order not in (1, 2):
        raise InvalidArgumentError(f"derivative order must be 1 or 2, got {order!r}")
    d = profile.grid.derivative_matrix(order)
    return RadialProfile(profile.grid, d @ (profile.values - profile.values[0]))


# ---------------------------------------------------------------------------
# quadrature


def _build_quadrature(nodes: np.ndarray):
    """Per-interval weights integrating the local degree-4 interpolant.

    Returns (starts, weights) where interval i integrates
    ``weights[i] @ values[starts[i]:starts[i]+5]``.
    """
    npts = nodes.size
    if npts < _QUAD_STENCIL:
        raise InvalidArgumentError("quadrature needs at least 5 nodes")
    n_int = npts - 1
    starts = np.clip(np.arange(n_int) - 2, 0, npts - _QUAD_STENCIL)
    idx = starts[:, None] + np.arange(_QUAD_STENCIL)[None, :]
    x = nodes[idx]
    widths = np.diff(nodes)
    centers = 0.5 * (nodes[:-1] + nodes[1:])
    t = (x - centers[:, None]) / widths[:, None]
    # moments of t^k over [-1/2, 1/2]
    k = np.arange(_QUAD_STENCIL)
    moments = np.where(k % 2 == 0, 0.5**k / (k + 1.0), 0.0)
    vander = t[:, :, None] ** k[None, None, :]  # (n_int, 5 nodes, 5 powers)
    rhs = np.broadcast_to(moments[:, None], (n_int, _QUAD_STENCIL, 1)).copy()
    weights = np.linalg.solve(np.swapaxes(vander, 1, 2), rhs)[:, :, 0]
    weights *= widths[:, None]
    return starts, weights


def integrate_from_zero(profile: RadialProfile) -> RadialProfile:
    """Cumulative integral I(r) = int_0^r p, sampled on the same grid."""
    starts, weights = profile.grid._quadrature()
    idx = starts[:, None] + np.arange(_QUAD_STENCIL)[None, :]
    increments = np.einsum("ij,ij->i", weights, profile.values[idx])
    out = np.empty(len(profile.grid))
    out[0] = 0.0
    np.cumsum(increments, out=out[1:])
    return RadialProfile(profile.grid, out)


def integrate_to_infinity(profile: RadialProfile) -> RadialProfile:
    """Improper integral J(r) = int_r^inf p via grid quadrature plus the
    fitted power-law remainder beyond r_max.

    Requires a tail model with exponent > 1; slower decay makes the
    integral diverge (TailTooSlowError).
    """
    if profile.tail is None:
        raise NoTailError("integrate_to_infinity needs a profile with a fitted tail model")
    p = profile.tail.exponent
    if not p > 1.0:
        raise TailTooSlowError(f"tail exponent {p:g} <= 1: integral to infinity diverges")
    starts, weights = profile.grid._quadrature()
    idx = starts[:, None] + np.arange(_QUAD_STENCIL)[None, :]
    increments = np.einsum("ij,ij->i", weights, profile.values[idx])
    r_max = profile.grid.r_max
    remainder = profile.tail.coefficient * r_max ** (1.0 - p) / (p - 1.0)
    # reverse accumulation: no cancellation against the near-origin bulk
    values = np.empty(len(profile.grid))
    values[-1] = 0.0
    values[:-1] = np.cumsum(increments[::-1])[::-1]
    values += remainder
    return RadialProfile(profile.grid, values)


# ---------------------------------------------------------------------------
# tail fits


def fit_tail(profile: RadialProfile, window: tuple[float, float] | None = None) -> TailModel:
    """Least-squares power-law fit of the profile on a log-log window.

    The window defaults to the last two decades [r_max/100, r_max].  The
    data must be single-signed and nonvanishing there; otherwise the fit
    is degenerate.
    """
    grid = profile.grid
    if window is None:
        window = (grid.r_max / 100.0, grid.r_max)
    lo, hi = float(window[0]), float(window[1])
    if not (0.0 < lo < hi <= grid.r_max * (1.0 + 1e-12)):
        raise InvalidArgumentError(f"bad fit window ({lo:g}, {hi:g}) for r_max={grid.r_max:g}")
    mask = (grid.nodes >= lo) & (grid.nodes <= hi)
    if int(mask.sum()) < 4:
        raise InvalidArgumentError("fit window contains fewer than 4 grid nodes")
    rw = grid.nodes[mask]
    vw = profile.values[mask]
    if np.all(vw == 0.0):
        raise DegenerateFitError("profile vanishes identically on the fit window")
    if np.any(vw == 0.0) or (np.any(vw > 0.0) and np.any(vw < 0.0)):
        raise DegenerateFitError("profile vanishes or changes sign on the fit window")
    sign = 1.0 if vw[0] > 0 else -1.0
    slope, intercept = np.polyfit(np.log(rw), np.log(np.abs(vw)), 1)
    exponent = -float(slope)
    coefficient = sign * float(np.exp(intercept))
    model = coefficient * rw ** (-exponent)
    misfit = float(np.max(np.abs(model / vw - 1.0)))
    return TailModel(coefficient, exponent, (lo, hi), misfit)


# ---------------------------------------------------------------------------
# interpolation


def _interp_cubic(nodes: np.ndarray, values: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Local 4-point Lagrange interpolation at the requested radii."""
    npts = nodes.size
    if npts < 4:
        raise InvalidArgumentError("interpolation needs at least 4 nodes")
    interval = np.clip(np.searchsorted(nodes, r, side="right") - 1, 0, npts - 2)
    s = np.clip(interval - 1, 0, npts - 4)
    idx = s[:, None] + np.arange(4)[None, :]
    x = nodes[idx]
    f = values[idx]
    out = np.zeros_like(r)
    for j in range(4):
        lj = np.ones_like(r)
        for k in range(4):
            if k != j:
                lj *= (r - x[:, k]) / (x[:, j] - x[:, k])
        out += f[:, j] * lj
    return out


# ---------------------------------------------------------------------------
# CSV exchange


def _read_csv_table(path, expected_header: str) -> np.ndarray:
    """Parse a numeric CSV with a fixed header; shared by the profile and
    solution-bundle readers."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError("empty CSV file")
    if lines[0].strip() != expected_header:
        raise SchemaError(f"expected header {expected_header!r}, got {lines[0]!r}")
    n_fields = expected_header.count(",") + 1
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != n_fields:
            raise ProfileParseError(f"expected {n_fields} fields, got {len(parts)}", line=lineno)
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ProfileParseError(str(exc), line=lineno) from None
    if not rows:
        raise SchemaError("CSV file has no data rows")
    return np.asarray(rows, dtype=float)


def write_profile_csv(profile: RadialProfile, path) -> None:
    """Write ``r,value`` rows at 17 significant digits."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("r,value\n")
        for r, v in zip(profile.grid.nodes, profile.values):
            fh.write(f"{r:.17g},{v:.17g}\n")


def read_profile_csv(path) -> RadialProfile:
    """Read a profile written by :func:`write_profile_csv`."""
    table = _read_csv_table(path, "r,value")
    return RadialProfile(RadialGrid(table[:, 0]), table[:, 1])
