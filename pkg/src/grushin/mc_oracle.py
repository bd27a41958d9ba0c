"""Monte Carlo check of the heat kernel through the Grushin diffusion.

dX = dB (N-dim), dY = |X| dW (k-dim) has generator ½(Δx + |x|²Δy), so the
law of (X_t, Y_t) started at (x0, 0) has density K(x, x0, y; t).  Paths
are advanced with Euler-Maruyama in blocks; block b draws from the stream
SeedSequence([seed, b]), so results do not depend on the thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .core import DomainTooSmallError, ModelParams
from .kernel import KernelQuadrature, kernel_values

BLOCK = 1 << 16


@dataclass(frozen=True)
class McConfig:
    paths: int = 1_000_000
    dt: float = 1e-3
    seed: int = 20240601
    x0: tuple = (1.0,)
    threads: Optional[int] = None

    def __post_init__(self):
        if self.paths < 1000:
            raise ValueError("need at least 1000 paths")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    def as_dict(self) -> dict:
        return {"paths": self.paths, "dt": self.dt, "seed": self.seed, "x0": list(self.x0)}


@dataclass
class PathSample:
    X: np.ndarray  # (paths, N)
    Y: np.ndarray  # (paths, k)
    t: float


def _n_steps(mc: McConfig, t: float) -> int:
    n = int(math.ceil(t / mc.dt - 1e-9))
    if n < 100:
        raise ValueError(f"dt = {mc.dt} is too coarse for t = {t} (need dt <= t/100)")
    return n


def _simulate_block(params: ModelParams, mc: McConfig, t: float, block: int, size: int):
    rng = np.random.default_rng(np.random.SeedSequence([mc.seed, block]))
    N, k = params.N, params.k
    n = _n_steps(mc, t)
    h = t / n
    sq = math.sqrt(h)
    X = np.empty((size, N))
    X[:] = np.broadcast_to(np.asarray(mc.x0, dtype=float), (N,))
    Y = np.zeros((size, k))
    for _ in range(n):
        z = rng.standard_normal((size, N + k))
        speed = np.sqrt(np.sum(X * X, axis=1, keepdims=True))
        Y += speed * (sq * z[:, N:])
        X += sq * z[:, :N]
    return X, Y


def _threads(mc: McConfig) -> int:
    if mc.threads:
        return mc.threads
    env = os.environ.get("GRUSHIN_THREADS")
    return int(env) if env else (os.cpu_count() or 1)


def simulate_paths(params: ModelParams, mc: McConfig, t: float) -> PathSample:
    """Euler-Maruyama samples of (X_t, Y_t) from (x0, 0)."""
    if t <= 0:
        raise ValueError("t must be positive")
    _n_steps(mc, t)
    sizes = [BLOCK] * (mc.paths // BLOCK)
    if mc.paths % BLOCK:
        sizes.append(mc.paths % BLOCK)
    jobs = list(enumerate(sizes))
    with ThreadPoolExecutor(max_workers=_threads(mc)) as pool:
        parts = list(pool.map(lambda js: _simulate_block(params, mc, t, js[0], js[1]), jobs))
    X = np.concatenate([p[0] for p in parts])
    Y = np.concatenate([p[1] for p in parts])
    return PathSample(X, Y, t)


def _mean_se(v: np.ndarray):
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def moments(sample: PathSample) -> dict:
    """Means and second moments with their standard errors."""
    out = {}
    for name, arr in (("x", sample.X), ("y", sample.Y)):
        for i in range(arr.shape[1]):
            out[f"mean_{name}{i}"], out[f"mean_{name}{i}_se"] = _mean_se(arr[:, i])
        out[f"second_moment_{name}"], out[f"second_moment_{name}_se"] = _mean_se(np.sum(arr ** 2, axis=1))
    return out


def exact_moments(params: ModelParams, x0, t: float) -> dict:
    """E|X_t|² = |x0|² + N t and E|Y_t|² = k (|x0|² t + N t²/2)."""
    x0_sq = float(np.sum(np.asarray(x0, dtype=float) ** 2))
    return {"second_moment_x": x0_sq + params.N * t,
            "second_moment_y": params.k * (x0_sq * t + params.N * t * t / 2.0)}


def _bin_box(params: ModelParams, x0, t: float, sigmas: float = 6.0):
    x0 = np.asarray(x0, dtype=float)
    ex = exact_moments(params, x0, t)
    x_half = sigmas * math.sqrt(t)
    y_half = sigmas * math.sqrt(ex["second_moment_y"] / params.k)
    return (float(x0[0] - x_half), float(x0[0] + x_half)), (-y_half, y_half)


def density_compare(params: ModelParams, mc: McConfig, quad: KernelQuadrature, t: float, bins: int = 64,
                    sample: Optional[PathSample] = None, gauss_points: int = 4,
                    return_bins: bool = False) -> dict:
    """L¹ distance between the (x, y) histogram of the paths and K integrated over the same bins.

    Only N = k = 1 is supported.  Also reports the distance between the
    x-histogram and the Gaussian marginal ∫K dy.
    """
    if params.N != 1 or params.k != 1:
        raise ValueError("histogram comparison is implemented for N = k = 1")
    if sample is None:
        sample = simulate_paths(params, mc, t)
    (xa, xb), (ya, yb) = _bin_box(params, mc.x0, t)
    x, y = sample.X[:, 0], sample.Y[:, 0]
    n = x.size
    counts, xe, ye = np.histogram2d(x, y, bins=bins, range=[[xa, xb], [ya, yb]])
    coverage = counts.sum() / n
    if coverage < 0.999:
        raise DomainTooSmallError(f"histogram box holds only {coverage:.5f} of the samples")
    emp = counts / n

    g, w = np.polynomial.legendre.leggauss(gauss_points)
    hx, hy = xe[1] - xe[0], ye[1] - ye[0]
    xq = (0.5 * (xe[:-1] + xe[1:])[:, None] + 0.5 * hx * g[None, :]).ravel()
    yq = (0.5 * (ye[:-1] + ye[1:])[:, None] + 0.5 * hy * g[None, :]).ravel()
    kv = kernel_values(params, quad, xq[:, None], np.asarray(mc.x0, dtype=float), np.abs(yq), t)
    kv = kv.reshape(bins, gauss_points, bins, gauss_points)
    prob = np.einsum("iajb,a,b->ij", kv, w, w) * (0.25 * hx * hy)
    l1 = float(np.abs(emp - prob).sum())

    cx, _ = np.histogram(x, bins=bins, range=(xa, xb))
    s = math.sqrt(2 * t)
    gx = 0.5 * np.diff(special.erf((xe - mc.x0[0]) / s))
    l1_x = float(np.abs(cx / n - gx).sum())
    out = {"l1_distance": l1, "l1_x_marginal": l1_x, "coverage": float(coverage),
           "kernel_mass_in_box": float(prob.sum()), "paths": int(n), "bins": bins}
    if return_bins:
        out.update(x_edges=xe, y_edges=ye, empirical=emp, kernel=prob)
    return out
