"""The heat semigroup S(t) of Δ_G on gridded data.

S(t) is a convolution in y, so a discrete Fourier transform along y reduces
it to one x-operator per frequency ξ: the propagator of ½Δx - ½|ξ|²|x|².
Each x-propagator is realized through the eigendecomposition of the Fourier
collocation matrix of that operator, so

    S(t) = F_y^{-1} ∘ [V_ξ exp(t Λ_ξ) V_ξ^T]_ξ ∘ F_y

holds for every t >= 0 with the semigroup law exact up to rounding and
S(0) = I.  The closed-form Mehler matrices of :mod:`grushin.oscillator`
are an independent check on these propagators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Field, Grid, ModelParams, NumericalError, lp_norm


def spectral_second_derivative(n: int, h: float) -> np.ndarray:
    """Periodic Fourier differentiation matrix for d²/dx² on n points of spacing h."""
    eta = 2 * np.pi * np.fft.fftfreq(n, d=h)
    d2 = np.fft.ifft(-(eta ** 2)[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0).real
    return 0.5 * (d2 + d2.T)


def _y_frequencies(grid: Grid) -> np.ndarray:
    """|ξ| for every mode of rfftn over the y-axes, flattened in C order."""
    k = grid.k
    axes = [2 * np.pi * np.fft.fftfreq(grid.y_points, d=grid.hy)] * (k - 1)
    axes.append(2 * np.pi * np.fft.rfftfreq(grid.y_points, d=grid.hy))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.sqrt(sum(m ** 2 for m in mesh)).ravel()


class SpectralPropagator:
    """Eigen-data of the per-frequency x-operators on one grid.

    Fields are moved to *modal* coordinates (y-Fourier modes times the
    eigenvectors of each x-operator), where S(t) is the diagonal factor
    ``exp(t * eigenvalues)``.  Instances are immutable after construction.
    """

    def __init__(self, params: ModelParams, grid: Grid):
        if (params.N, params.k) != (grid.N, grid.k):
            raise ValueError("grid dimensions do not match model dimensions")
        self.params = params
        self.grid = grid
        nx = grid.x_points
        xi = _y_frequencies(grid)
        uniq, inv = np.unique(np.round(xi, 12), return_inverse=True)
        self.frequencies = uniq
        self.mode_index = inv.ravel()
        self._identity_map = uniq.size == xi.size and np.array_equal(self.mode_index, np.arange(xi.size))
        self.n_modes = xi.size

        x2 = grid.x_nodes ** 2
        d2 = spectral_second_derivative(nx, grid.hx)
        lam = np.empty((uniq.size, nx))
        vecs = np.empty((uniq.size, nx, nx))
        for j, a in enumerate(uniq):
            h = 0.5 * d2 - 0.5 * a * a * np.diag(x2)
            lam[j], vecs[j] = np.linalg.eigh(h)
        # the generator is negative semidefinite; clip rounding above zero
        self.eigenvalues = np.minimum(lam, 0.0)
        self.eigenvectors = vecs
        self._order = np.argsort(self.mode_index, kind="stable")
        counts = np.bincount(self.mode_index, minlength=uniq.size)
        self._bounds = np.concatenate([[0], np.cumsum(counts)])
        self._modal_eigs = self._assemble_eigenvalues()

    def _assemble_eigenvalues(self) -> np.ndarray:
        lam = self.eigenvalues[self.mode_index]  # (m, nx)
        N = self.params.N
        total = np.zeros((self.n_modes,) + (self.grid.x_points,) * N)
        for ax in range(N):
            shape = [self.n_modes] + [1] * N
            shape[1 + ax] = self.grid.x_points
            total = total + lam.reshape(shape)
        return total

    @property
    def modal_eigenvalues(self) -> np.ndarray:
        """Eigenvalue of every modal coordinate, shape (modes, nx, ..., nx)."""
        return self._modal_eigs

    def _apply_x(self, arr: np.ndarray, mats: np.ndarray, transpose: bool) -> np.ndarray:
        """Multiply along each x-axis of ``arr`` (modes, nx, ..., nx) by per-frequency matrices.

        Computes u @ M (contracting the axis with M's first index) or u @ M^T.
        """
        N = self.params.N
        nx = self.grid.x_points
        real = np.isrealobj(arr)
        out = arr
        for ax in range(N):
            moved = np.moveaxis(out, 1 + ax, -1)
            shp = moved.shape
            flat = moved.reshape(self.n_modes, -1, nx)
            if not real:
                flat = np.concatenate([flat.real, flat.imag], axis=1)
            res = self._grouped_matmul(flat, mats, transpose)
            if not real:
                half = res.shape[1] // 2
                res = res[:, :half] + 1j * res[:, half:]
            out = np.moveaxis(res.reshape(shp), -1, 1 + ax)
        return out

    def _grouped_matmul(self, flat: np.ndarray, mats: np.ndarray, transpose: bool) -> np.ndarray:
        m_t = np.swapaxes(mats, -1, -2) if transpose else mats
        if self._identity_map:
            return flat @ m_t
        out = np.empty_like(flat)
        for u in range(self.frequencies.size):
            idx = self._order[self._bounds[u]:self._bounds[u + 1]]
            out[idx] = flat[idx] @ m_t[u]
        return out

    def _y_forward(self, values: np.ndarray) -> np.ndarray:
        g = self.grid
        k, N = g.k, g.N
        spec = np.fft.rfftn(values, axes=tuple(range(N, N + k)))
        spec = spec.reshape((g.x_points,) * N + (-1,))
        return np.moveaxis(spec, -1, 0)

    def _y_inverse(self, spec: np.ndarray) -> np.ndarray:
        g = self.grid
        k, N = g.k, g.N
        yshape = (g.y_points,) * (k - 1) + (g.y_points // 2 + 1,)
        spec = np.moveaxis(spec, 0, -1).reshape((g.x_points,) * N + yshape)
        return np.fft.irfftn(spec, s=(g.y_points,) * k, axes=tuple(range(N, N + k)))

    def to_modal(self, values) -> np.ndarray:
        values = values.values if isinstance(values, Field) else np.asarray(values)
        return self._apply_x(self._y_forward(values.reshape(self.grid.shape)), self.eigenvectors, False)

    def from_modal(self, coeffs: np.ndarray) -> np.ndarray:
        return self._y_inverse(self._apply_x(coeffs, self.eigenvectors, True))

    def decay(self, t: float) -> np.ndarray:
        if t < 0:
            raise NumericalError("no backward flow: t must be >= 0")
        return np.exp(t * self._modal_eigs)

    def apply(self, t: float, phi: Field) -> Field:
        """S(t)φ through modal coordinates."""
        _check_grid(self.grid, phi)
        out = self.from_modal(self.decay(t) * self.to_modal(phi.values))
        return Field(self.grid, _checked(out))

    def x_matrices(self, t: float) -> np.ndarray:
        """Per-frequency x-propagators V exp(tΛ) V^T, shape (frequencies, nx, nx)."""
        e = np.exp(t * self.eigenvalues)
        v = self.eigenvectors
        return np.einsum("fij,fj,fkj->fik", v, e, v, optimize=True)


@dataclass(frozen=True)
class PropagatorBank:
    """S(t) as one dense x-matrix per distinct |ξ| of the y-grid.

    For N > 1 each matrix is the one-dimensional factor, applied along every
    x-axis in turn.
    """

    t: float
    grid: Grid
    frequencies: np.ndarray = field(repr=False)
    matrices: np.ndarray = field(repr=False)
    propagator: SpectralPropagator = field(repr=False, compare=False)


_PROPAGATORS: dict = {}


def get_propagator(params: ModelParams, grid: Grid) -> SpectralPropagator:
    """Cached :class:`SpectralPropagator` for (N, k, grid)."""
    key = (params.N, params.k, grid)
    prop = _PROPAGATORS.get(key)
    if prop is None:
        if len(_PROPAGATORS) > 8:
            _PROPAGATORS.clear()
        prop = _PROPAGATORS[key] = SpectralPropagator(params, grid)
    return prop


def build_propagator_bank(params: ModelParams, grid: Grid, t: float) -> PropagatorBank:
    if t <= 0:
        raise NumericalError(f"propagator bank needs t > 0, got {t}")
    prop = get_propagator(params, grid)
    mats = prop.x_matrices(t)
    mats.setflags(write=False)
    return PropagatorBank(t, grid, prop.frequencies, mats, prop)


def apply_semigroup(bank: PropagatorBank, phi: Field) -> Field:
    """S(t)φ: y-transform, per-frequency x-matrices, inverse y-transform."""
    _check_grid(bank.grid, phi)
    prop = bank.propagator
    spec = prop._y_forward(phi.values)
    spec = prop._apply_x(spec, bank.matrices, True)
    return Field(bank.grid, _checked(prop._y_inverse(spec)))


def semigroup(params: ModelParams, grid: Grid, t: float, phi: Field) -> Field:
    """Convenience wrapper: S(t)φ with a cached propagator; t = 0 returns φ."""
    if t == 0:
        return phi
    return get_propagator(params, grid).apply(t, phi)


def identity_approx_error(params: ModelParams, grid: Grid, phi: Field, t_list: Sequence[float],
                          p: float = 2.0) -> list:
    """[(t, ‖S(t)φ - φ‖_p)] for each t."""
    prop = get_propagator(params, grid)
    coeffs = prop.to_modal(phi.values)
    out = []
    for t in t_list:
        st = prop.from_modal(prop.decay(t) * coeffs)
        out.append((float(t), lp_norm(Field(grid, st - phi.values), p)))
    return out


def wraparound_mass(params: ModelParams, grid: Grid, phi: Field, t: float, band: int = 4) -> float:
    """Fraction of |S(t)φ| mass within ``band`` nodes of any box face.

    A large value means the periodic box is too small for the horizon t.
    """
    u = np.abs(semigroup(params, grid, t, phi).values)
    total = u.sum()
    if total == 0:
        return 0.0
    inner = u
    for ax in range(u.ndim):
        inner = np.take(inner, np.arange(band, u.shape[ax] - band), axis=ax)
    return float(1.0 - inner.sum() / total)


def _check_grid(grid: Grid, phi: Field):
    if phi.grid != grid:
        raise ValueError("field is not on the propagator's grid")


def _checked(values: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NumericalError("semigroup produced non-finite values")
    return values
