"""Model parameters, tensor grids, gridded fields, norms and the regime classifier."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# |p - critical_p| below this counts as the critical case
CRITICAL_TIE_TOL = 1e-12


class GrushinError(Exception):
    """Base class for errors raised by this package."""


class HypothesisError(GrushinError):
    """Model parameters violate the hypotheses of the requested theory."""


class NumericalError(GrushinError):
    """A numerical procedure failed (non-finite values, quadrature residue, ...)."""


class InvalidFieldError(NumericalError):
    pass


class DomainTooSmallError(NumericalError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Dimensions and exponents of u_t = Δ_G u + λ|u|^{ρ-1}u on R^N x R^k.

    ``r`` is the auxiliary Lebesgue index used in the critical regime; it is
    ignored in the subcritical regime, where r = ρp.
    """

    N: int = 1
    k: int = 1
    rho: float = 2.0
    p: float = 2.0
    r: Optional[float] = None
    lam: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if not self.rho > 1:
            raise ValueError(f"rho must exceed 1, got {self.rho}")
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.r is not None and not self.r > self.p:
            raise ValueError(f"r must exceed p, got r={self.r}, p={self.p}")

    @property
    def Q(self) -> int:
        """Homogeneous dimension N + 2k."""
        return self.N + 2 * self.k

    @property
    def critical_p(self) -> float:
        return self.Q * (self.rho - 1.0) / 2.0

    @property
    def monitor_index(self) -> float:
        """Lebesgue index of the weighted norm: ρp (subcritical) or r (critical)."""
        if self.r is not None and abs(self.p - self.critical_p) <= CRITICAL_TIE_TOL:
            return float(self.r)
        return self.rho * self.p


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on [-Lx, Lx)^N x [-Ly, Ly)^k.

    Nodes sit at ``-extent + j * spacing`` for ``j = 0 .. points-1`` so the
    origin is a node when the point count is even; every axis is treated as
    periodic of length ``2 * extent``.
    """

    N: int = 1
    k: int = 1
    x_extent: float = 8.0
    x_points: int = 128
    y_extent: float = 12.0
    y_points: int = 256

    def __post_init__(self):
        if self.x_extent <= 0 or self.y_extent <= 0:
            raise ValueError("grid extents must be positive")
        if self.x_points < 4 or self.y_points < 4:
            raise ValueError("grids need at least 4 points per axis")
        if self.N < 1 or self.k < 1:
            raise ValueError("grid dimensions must be positive")

    @classmethod
    def default(cls, params: Optional[ModelParams] = None) -> "Grid":
        N, k = (params.N, params.k) if params is not None else (1, 1)
        return cls(N=N, k=k)

    @property
    def hx(self) -> float:
        return 2.0 * self.x_extent / self.x_points

    @property
    def hy(self) -> float:
        return 2.0 * self.y_extent / self.y_points

    @property
    def x_nodes(self) -> np.ndarray:
        return -self.x_extent + self.hx * np.arange(self.x_points)

    @property
    def y_nodes(self) -> np.ndarray:
        return -self.y_extent + self.hy * np.arange(self.y_points)

    @property
    def shape(self) -> tuple:
        return (self.x_points,) * self.N + (self.y_points,) * self.k

    @property
    def cell_volume(self) -> float:
        return self.hx ** self.N * self.hy ** self.k

    @property
    def size(self) -> int:
        return self.x_points ** self.N * self.y_points ** self.k

    def mesh(self):
        """Open coordinate arrays (x_1..x_N, y_1..y_k), broadcastable to ``shape``."""
        axes = [self.x_nodes] * self.N + [self.y_nodes] * self.k
        return np.meshgrid(*axes, indexing="ij", sparse=True)

    def x_sq(self) -> np.ndarray:
        """|x|^2 broadcastable against a field."""
        coords = self.mesh()[: self.N]
        return sum(c ** 2 for c in coords)

    def y_sq(self) -> np.ndarray:
        coords = self.mesh()[self.N:]
        return sum(c ** 2 for c in coords)

    def scaled(self, t: float) -> "Grid":
        """Grid adapted to time t by the parabolic scaling x ~ t^{1/2}, y ~ t."""
        return Grid(self.N, self.k, self.x_extent * math.sqrt(t), self.x_points,
                    self.y_extent * t, self.y_points)

    def as_dict(self) -> dict:
        return {"N": self.N, "k": self.k, "x_extent": self.x_extent, "x_points": self.x_points,
                "y_extent": self.y_extent, "y_points": self.y_points}


@dataclass(frozen=True)
class Field:
    """Real or complex samples of a function on a Grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.size != self.grid.size:
            raise InvalidFieldError(
                f"field has {values.size} samples, grid has {self.grid.size}")
        values = values.reshape(self.grid.shape)
        if not np.all(np.isfinite(values)):
            raise InvalidFieldError("field contains non-finite samples")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Field":
        """Sample ``func(x, y)`` where x and y are lists of open coordinate arrays."""
        coords = grid.mesh()
        vals = func(coords[: grid.N], coords[grid.N:])
        return cls(grid, np.broadcast_to(vals, grid.shape).copy())

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    def __add__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c) -> "Field":
        return Field(self.grid, c * self.values)

    __rmul__ = __mul__

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)


def _check_same_grid(a: Field, b: Field):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def gaussian(grid: Grid, amplitude=1.0, x_width=1.0, y_width=1.0, x_center=0.0, y_center=0.0) -> Field:
    """amplitude * exp(-|x-xc|^2/(2 wx^2) - |y-yc|^2/(2 wy^2))."""
    def f(xs, ys):
        ex = sum((x - x_center) ** 2 for x in xs) / (2 * x_width ** 2)
        ey = sum((y - y_center) ** 2 for y in ys) / (2 * y_width ** 2)
        return amplitude * np.exp(-ex - ey)
    return Field.from_function(grid, f)


def plateau(grid: Grid, amplitude=10.0, x_half=4.0, y_half=6.0, edge=0.25) -> Field:
    """Smooth plateau of height ``amplitude`` on |x_i| < x_half, |y_j| < y_half."""
    def step(s, half):
        return 0.5 * (np.tanh((s + half) / edge) - np.tanh((s - half) / edge))

    def f(xs, ys):
        out = amplitude
        for x in xs:
            out = out * step(x, x_half)
        for y in ys:
            out = out * step(y, y_half)
        return out
    return Field.from_function(grid, f)


def lp_norm(f, q: float) -> float:
    """L^q norm of a field by the tensor trapezoid rule on the periodic grid.

    ``q = inf`` gives the max norm.
    """
    values = f.values if isinstance(f, Field) else np.asarray(f)
    if not np.all(np.isfinite(values)):
        raise InvalidFieldError("cannot take the norm of a non-finite field")
    a = np.abs(values)
    if math.isinf(q):
        return float(a.max()) if a.size else 0.0
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    vol = f.grid.cell_volume if isinstance(f, Field) else 1.0
    m = a.max()
    if m == 0:
        return 0.0
    # scaled to avoid overflow of |f|^q for large q
    return float(m * (np.sum((a / m) ** q) * vol) ** (1.0 / q))


class Regime(str, enum.Enum):
    SUBCRITICAL = "subcritical-local"
    CRITICAL = "critical-global-small-data"
    VIOLATED = "hypotheses-violated"


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    alpha: float
    critical_p: float
    alpha_rho: float
    message: str = ""

    @property
    def contraction_margin(self) -> float:
        """1 - αρ; positive whenever the weighted fixed-point argument applies."""
        return 1.0 - self.alpha_rho

    def as_dict(self) -> dict:
        return {"regime": self.regime.value, "alpha": self.alpha, "critical_p": self.critical_p,
                "alpha_rho": self.alpha_rho, "one_minus_alpha_rho": self.contraction_margin,
                "message": self.message}


def regime_classify(params: ModelParams) -> RegimeReport:
    """Decide which existence theory covers ``params``.

    Subcritical when p > Q(ρ-1)/2 (local solutions, r = ρp); critical when
    p equals that value up to CRITICAL_TIE_TOL (global solutions for small
    data, needs r in (p, ρp)); otherwise the hypotheses fail.
    """
    Q, rho, p = params.Q, params.rho, params.p
    pc = params.critical_p
    if abs(p - pc) <= CRITICAL_TIE_TOL:
        r = params.r
        if r is None or not (p < r < rho * p):
            alpha = float("nan") if r is None else Q / 2 * (1 / p - 1 / r)
            return RegimeReport(Regime.VIOLATED, alpha, pc, alpha * rho,
                                f"critical case p = {pc:g} requires r in ({p:g}, {rho * p:g})")
        alpha = Q / 2 * (1 / p - 1 / r)
        return RegimeReport(Regime.CRITICAL, alpha, pc, alpha * rho, "")
    alpha = Q * (rho - 1) / (2 * rho * p)
    if p > pc:
        return RegimeReport(Regime.SUBCRITICAL, alpha, pc, alpha * rho, "")
    return RegimeReport(Regime.VIOLATED, alpha, pc, alpha * rho,
                        f"hypothesis p > (N+2k)(rho-1)/2 = {pc:g} violated by p = {p:g}")


def nonlinearity(u, rho: float, lam: float = 1.0):
    """Pointwise λ|u|^{ρ-1}u; accepts a Field or an array."""
    if isinstance(u, Field):
        return Field(u.grid, nonlinearity(u.values, rho, lam))
    u = np.asarray(u)
    return lam * np.abs(u) ** (rho - 1.0) * u
