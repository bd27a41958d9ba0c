"""Heat kernel of ½Δ - ½a²|x|² (the Mehler kernel) at a fixed frequency a.

The Grushin kernel is the inverse partial Fourier transform in y of this
kernel with a = |ξ|.  Everything is assembled in log space::

    log L = (N/2) log(a / (2π sinh(at)))
            - (a/2) [ |x-x0|² coth(at) + 2 x·x0 tanh(at/2) ]

which uses coth(z) - csch(z) = tanh(z/2) to avoid cancellation when x ≈ x0
and stays finite when at is large.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NumericalError

# below this value of a*t the second-order small-z expansions are used
SMALL_AT = 1e-6

LOG_2PI = np.log(2.0 * np.pi)


def log_sinh(z):
    """log(sinh z) for z > 0 without overflow."""
    z = np.asarray(z, dtype=float)
    return z + np.log(-np.expm1(-2.0 * z)) - np.log(2.0)


def mehler_coefficients(a, t):
    """Return (log prefactor / N, a coth(at), a tanh(at/2)) for arrays a >= 0.

    The prefactor is per spatial dimension: log((a/(2π sinh(at)))^{1/2}).
    """
    a = np.asarray(a, dtype=float)
    if np.any(np.asarray(t) <= 0):
        raise NumericalError("Mehler kernel needs t > 0")
    z = a * t
    small = z < SMALL_AT
    zs = np.where(small, 1.0, z)  # placeholder keeps the exact branch finite
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.log(np.where(small, 1.0, a)) - log_sinh(zs)
        a_coth = a / np.tanh(zs)
    a_tanh = a * np.tanh(0.5 * z)
    # z/sinh z ≈ 1 - z²/6 and z coth z ≈ 1 + z²/3
    log_ratio = np.where(small, -np.log(t) - z ** 2 / 6.0, log_ratio)
    a_coth = np.where(small, 1.0 / t + a * z / 3.0, a_coth)
    a_tanh = np.where(small, 0.5 * a * z, a_tanh)
    return 0.5 * (log_ratio - LOG_2PI), a_coth, a_tanh


@dataclass(frozen=True)
class OscillatorKernel:
    a: float
    N: int
    t: float

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("frequency a must be >= 0")
        if self.t <= 0:
            raise NumericalError(f"t must be positive, got {self.t}")
        if self.N < 1:
            raise ValueError("N must be >= 1")


def mehler_log(kern: OscillatorKernel, x, x0):
    """log L(x, x0; t); for N > 1 the trailing axis holds coordinates, for N == 1 inputs are plain arrays."""
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if kern.N == 1:
        x, x0 = x[..., None], x0[..., None]
    lp, a_coth, a_tanh = mehler_coefficients(kern.a, kern.t)
    dist2 = np.sum((x - x0) ** 2, axis=-1)
    dot = np.sum(x * x0, axis=-1)
    return kern.N * lp - 0.5 * (dist2 * a_coth + 2.0 * dot * a_tanh)


def mehler_point(kern: OscillatorKernel, x, x0):
    """L(x, x0; t) = (a/(2π sinh at))^{N/2} exp(-(a/(2 sinh at))((|x|²+|x0|²)cosh at - 2x·x0))."""
    return np.exp(mehler_log(kern, x, x0))


def mehler_matrix(kern: OscillatorKernel, nodes, full: bool = False) -> np.ndarray:
    """Quadrature matrix M[x, w] = L(x, w) * cell over a uniform axis.

    By default the one-dimensional factor is returned (the N-dimensional
    kernel is the product of per-coordinate factors, so the operator on an
    N-dimensional tensor grid is the N-fold Kronecker power).  ``full=True``
    builds that Kronecker power explicitly.
    """
    nodes = np.asarray(nodes, dtype=float)
    h = nodes[1] - nodes[0]
    one_d = OscillatorKernel(kern.a, 1, kern.t)
    m = mehler_point(one_d, nodes[:, None], nodes[None, :]) * h
    if full and kern.N > 1:
        out = m
        for _ in range(kern.N - 1):
            out = np.kron(out, m)
        return out
    return m
