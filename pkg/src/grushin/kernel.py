"""Pointwise evaluation and integral diagnostics of the Grushin heat kernel.

K(x, x0, y; t) = (2π)^{-(N+2k)/2} ∫_{R^k} f(x, x0, ξ; t) e^{iξ·y} dξ, with

    f(x, x0, ξ; t) = (|ξ|/sinh(|ξ|t))^{N/2}
                     exp(-(|ξ|/2)((|x|²+|x0|²) coth(|ξ|t) - 2x·x0 csch(|ξ|t))).

f is radial in ξ, so the ξ-integral is a cosine transform (k = 1) or a
Bessel-weighted radial transform (k >= 2) over [0, Ξ], computed with
composite Gauss-Legendre panels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .core import DomainTooSmallError, Field, Grid, ModelParams, NumericalError, lp_norm
from .oscillator import LOG_2PI, mehler_coefficients

# relative size of the kernel on the box faces above which the box is too small
TAIL_TOL = 1e-9


@dataclass(frozen=True)
class KernelQuadrature:
    """Composite Gauss-Legendre rule on [0, Ξ] for the radial ξ-integral.

    ``xi_cutoff=None`` picks Ξ from (N t / 2) Ξ = ``decay_target``.  The panel
    count is the largest of: ``xi_points / order``, ``panels_per_oscillation``
    per period of the cos/Bessel factor, enough panels that the
    exponential decay of the integrand is resolved (rate * width <= 2), and
    panels no wider than π/(2t), a quarter of the spacing of the poles of
    1/sinh(ξt) on the imaginary axis.
    """

    xi_cutoff: Optional[float] = None
    xi_points: int = 64
    order: int = 8
    panels_per_oscillation: int = 8
    decay_target: float = 40.0

    def __post_init__(self):
        if self.xi_points < 64:
            raise ValueError("xi_points must be >= 64")
        if self.xi_cutoff is not None and self.xi_cutoff <= 0:
            raise ValueError("xi_cutoff must be positive")

    def cutoff(self, N: int, t: float) -> float:
        if self.xi_cutoff is not None:
            return float(self.xi_cutoff)
        return self.decay_target / (0.5 * N * t)

    def nodes(self, N: int, t: float, y_max: float = 0.0, rate_max: float = 0.0):
        """Nodes and weights on [0, Ξ]."""
        xi = self.cutoff(N, t)
        panels = max(
            math.ceil(self.xi_points / self.order),
            math.ceil(self.panels_per_oscillation * xi * y_max / (2 * math.pi)),
            math.ceil(xi * rate_max / 2.0),
            math.ceil(2.0 * xi * t / math.pi),
        )
        g, w = np.polynomial.legendre.leggauss(self.order)
        edges = np.linspace(0.0, xi, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        r = (mid[:, None] + half[:, None] * g[None, :]).ravel()
        wts = (half[:, None] * w[None, :]).ravel()
        return r, wts


def _decay_rate(N, t, x_sq, x0_sq):
    # large-|ξ| exponential rate of f: N t/2 + (|x|² + |x0|²)/2
    return 0.5 * N * t + 0.5 * (x_sq + x0_sq)


def log_f(N: int, r, x, x0, t: float):
    """log f(x, x0, ξ; t) on a (points, nodes) array; x has shape (P, N), x0 shape (N,)."""
    lp, a_coth, a_tanh = mehler_coefficients(r, t)
    # lp includes -(1/2)log(2π) per dimension; f carries no 2π factor
    lp = lp + 0.5 * LOG_2PI
    x = np.asarray(x, dtype=float)
    dist2 = np.sum((x - x0) ** 2, axis=-1)[:, None]
    dot = (x @ x0)[:, None]
    return N * lp[None, :] - 0.5 * (dist2 * a_coth[None, :] + 2.0 * dot * a_tanh[None, :])


def _bessel_scaled(nu: float, z):
    """J_nu(z)/z^nu, smooth through z = 0."""
    z = np.asarray(z, dtype=float)
    c0 = 1.0 / (2.0 ** nu * special.gamma(nu + 1.0))
    small = z < 1e-4
    zs = np.where(small, 1.0, z)
    out = special.jv(nu, zs) / zs ** nu
    return np.where(small, c0 * (1.0 - z ** 2 / (4.0 * (nu + 1.0))), out)


def _radial_weights(k: int, r, w, y_abs):
    """Matrix C with ∫_{R^k} g(|ξ|) e^{iξ·y} dξ ≈ Σ_j g(r_j) C[j, y]."""
    y_abs = np.asarray(y_abs, dtype=float)
    if k == 1:
        return 2.0 * w[:, None] * np.cos(r[:, None] * y_abs[None, :])
    nu = 0.5 * k - 1.0
    z = r[:, None] * y_abs[None, :]
    return (2 * math.pi) ** (0.5 * k) * (w * r ** (k - 1))[:, None] * _bessel_scaled(nu, z)


def kernel_values(params: ModelParams, quad: KernelQuadrature, x, x0, y_abs, t: float) -> np.ndarray:
    """K(x_i, x0, y; t) for x of shape (P, N) and |y| values of shape (Y,); returns (P, Y)."""
    if t <= 0:
        raise NumericalError(f"kernel needs t > 0, got {t}")
    N, k = params.N, params.k
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != N:
        x = x.reshape(-1, N)
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (N,))
    y_abs = np.abs(np.atleast_1d(np.asarray(y_abs, dtype=float)))
    x_sq = np.sum(x ** 2, axis=1)
    x0_sq = float(x0 @ x0)
    r, w = quad.nodes(N, t, y_max=float(y_abs.max(initial=0.0)),
                      rate_max=float(_decay_rate(N, t, x_sq.max(), x0_sq)))
    fvals = np.exp(log_f(N, r, x, x0, t))
    vals = fvals @ _radial_weights(k, r, w, y_abs)
    return vals * (2 * math.pi) ** (-0.5 * (N + 2 * k))


def kernel_point(params: ModelParams, quad: KernelQuadrature, x, x0, y, t: float) -> float:
    """K(x, x0, y; t) at a single point (x, x0 in R^N, y in R^k)."""
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, params.N)
    y_abs = float(np.linalg.norm(np.atleast_1d(y)))
    return float(kernel_values(params, quad, x, x0, [y_abs], t)[0, 0])


def kernel_on_grid(params: ModelParams, quad: KernelQuadrature, grid: Grid, x0, t: float) -> np.ndarray:
    """K(·, x0, ·; t) sampled on every grid node, shape ``grid.shape``."""
    N, k = params.N, params.k
    xs = np.stack(np.meshgrid(*([grid.x_nodes] * N), indexing="ij"), axis=-1).reshape(-1, N)
    y_abs_full = np.sqrt(grid.y_sq()).reshape(-1) if k > 1 else np.abs(grid.y_nodes)
    uniq, inv = np.unique(np.round(y_abs_full, 12), return_inverse=True)
    vals = kernel_values(params, quad, xs, x0, uniq, t)
    return vals[:, inv.ravel()].reshape(grid.shape)


def tail_ratio(values: np.ndarray, N: int) -> float:
    """Largest |value| on the box faces relative to the global max."""
    a = np.abs(values)
    m = a.max()
    if m == 0:
        return 0.0
    faces = []
    for ax in range(a.ndim):
        faces.append(np.take(a, 0, axis=ax).max())
        faces.append(np.take(a, -1, axis=ax).max())
    return float(max(faces) / m)


def _checked_kernel(params, quad, grid, x0, t):
    vals = kernel_on_grid(params, quad, grid, x0, t)
    ratio = tail_ratio(vals, params.N)
    if ratio > TAIL_TOL:
        raise DomainTooSmallError(
            f"kernel at t={t:g} reaches {ratio:.2e} of its peak on the box faces; enlarge the grid")
    return vals


def adapted_grid(params: ModelParams, t: float, x0=0.0, x_points: int = 128, y_points: int = 256,
                 x_width: float = 8.0, y_width: float = 12.0) -> Grid:
    """A box sized for K(·, x0, ·; t): x spread ~ t^{1/2} about x0, y spread ~ (t² + 2|x0|²t)^{1/2}."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    x0_max = float(np.abs(x0).max())
    x0_sq = float(np.sum(x0 ** 2))
    x_ext = x0_max + x_width * math.sqrt(t)
    y_ext = y_width * math.sqrt(t * t + 2.0 * x0_sq * t)
    return Grid(params.N, params.k, x_ext, x_points, y_ext, y_points)


def kernel_mass(params: ModelParams, quad: KernelQuadrature, grid: Optional[Grid], x0, t: float) -> float:
    """∫ K(x, x0, y; t) d(x, y) by the grid trapezoid rule (``grid=None`` adapts the box to t)."""
    if grid is None:
        grid = adapted_grid(params, t, x0)
    vals = _checked_kernel(params, quad, grid, x0, t)
    return float(vals.sum() * grid.cell_volume)


def kernel_lq_norm(params: ModelParams, quad: KernelQuadrature, grid: Optional[Grid], x0, t: float,
                   q: float) -> float:
    """‖K(·, x0, ·; t)‖_{L^q(R^{N+k})} on the grid (``grid=None`` adapts the box to t)."""
    if grid is None:
        grid = adapted_grid(params, t, x0)
    vals = _checked_kernel(params, quad, grid, x0, t)
    return lp_norm(Field(grid, vals), q)


def decay_exponent_fit(params: ModelParams, quad: KernelQuadrature, grid: Optional[Grid], x0, q: float,
                       t_list: Sequence[float], scale_grid: bool = True) -> float:
    """Least-squares slope of log ‖K(t)‖_q against log t.

    ``grid`` is taken as the box for t = 1 and rescaled to each t when
    ``scale_grid`` is set; ``grid=None`` uses :func:`adapted_grid`.
    """
    t_list = np.asarray(sorted(t_list), dtype=float)
    if t_list.size < 4:
        raise ValueError("need at least 4 times for a slope fit")
    norms = []
    for t in t_list:
        g = grid.scaled(t) if (grid is not None and scale_grid) else grid
        norms.append(kernel_lq_norm(params, quad, g, x0, t, q))
    slope, _ = np.polyfit(np.log(t_list), np.log(norms), 1)
    return float(slope)


def predicted_decay_exponent(params: ModelParams, q: float) -> float:
    """-(Q/2)(1 - 1/q), the decay rate of ‖K(t)‖_q."""
    inv_q = 0.0 if math.isinf(q) else 1.0 / q
    return -0.5 * params.Q * (1.0 - inv_q)


def y_marginal(params: ModelParams, x, x0, t: float) -> np.ndarray:
    """∫ K dy = (2πt)^{-N/2} exp(-|x-x0|²/(2t)), the Gaussian kernel of ½Δx."""
    x = np.atleast_2d(np.asarray(x, dtype=float)).reshape(-1, params.N)
    d2 = np.sum((x - np.asarray(x0, dtype=float)) ** 2, axis=1)
    return (2 * math.pi * t) ** (-0.5 * params.N) * np.exp(-d2 / (2 * t))
