"""Discrete left quantization on the periodic grid.

Conventions (normative for all file formats and operators):

    uhat_k = (1/N) sum_j u_j exp(-2 pi i j k / N),
    u_j    = sum_k uhat_k exp(+2 pi i j k / N),   k in {-N/2, ..., N/2 - 1}.

Op(f) acts by v_j = sum_k f(z, x_j, k) uhat_k exp(i k x_j); the sum is a
direct O(N^2) contraction, exact for pure multipliers and for pure
multiplication operators.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Union

import numpy as np

from .errors import ConfigError, GridMismatchError
from .symbols import SymbolModel

_PHASE_CACHE: dict = {}


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with x_j = 2 pi j / N, integer frequencies."""

    n_points: int

    def __post_init__(self):
        n = self.n_points
        if n < 8 or (n & (n - 1)) != 0:
            raise ConfigError("n_points must be a power of two, at least 8")

    @property
    def x(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_points) / self.n_points

    @property
    def freqs(self) -> np.ndarray:
        """Integer frequencies in FFT order: 0 .. N/2-1, -N/2 .. -1."""
        return np.fft.fftfreq(self.n_points, 1.0 / self.n_points)

    @property
    def dealias_cut(self) -> int:
        return self.n_points // 3

    def phases(self) -> np.ndarray:
        """exp(i k x_j), shape (N, N), cached per grid size."""
        n = self.n_points
        if n not in _PHASE_CACHE:
            _PHASE_CACHE[n] = np.exp(1j * np.outer(self.x, self.freqs))
        return _PHASE_CACHE[n]


@dataclass
class WaveField:
    grid: Grid
    z: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n_points,):
            raise GridMismatchError("field length does not match grid")

    def norm_l2(self) -> float:
        w = 2.0 * np.pi / self.grid.n_points
        return float(np.sqrt(w * np.sum(np.abs(self.values) ** 2)))

    def copy(self) -> "WaveField":
        return WaveField(self.grid, self.z, self.values.copy())


@dataclass
class GridSymbol:
    """Symbol values tabulated on (x_j, k); k runs in FFT order."""

    grid: Grid
    z: float
    table: np.ndarray

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=complex)
        n = self.grid.n_points
        if self.table.shape != (n, n):
            raise GridMismatchError("table shape does not match grid")
        if not np.all(np.isfinite(self.table)):
            raise ConfigError("symbol table has non-finite entries")


def to_fourier(u: WaveField) -> np.ndarray:
    return np.fft.fft(u.values) / u.grid.n_points


def from_fourier(grid: Grid, z: float, uhat: np.ndarray) -> WaveField:
    return WaveField(grid, z, np.fft.ifft(uhat) * grid.n_points)


def symbol_table(model: SymbolModel, grid: Grid, z: float) -> GridSymbol:
    tab = model.value(z, grid.x[:, None], grid.freqs[None, :])
    tab = np.broadcast_to(np.asarray(tab, dtype=complex), (grid.n_points, grid.n_points))
    return GridSymbol(grid, z, tab.copy())


def apply_op(sym: Union[GridSymbol, SymbolModel], u: WaveField, z: float | None = None) -> WaveField:
    """Left-quantized application v_j = sum_k f(z, x_j, k) uhat_k e^{i k x_j}.

    For a SymbolModel the table is built at ``z`` (default: the field's z).
    """
    if isinstance(sym, SymbolModel):
        sym = symbol_table(sym, u.grid, u.z if z is None else z)
    if sym.grid.n_points != u.grid.n_points:
        raise GridMismatchError("symbol and field grids differ")
    uhat = to_fourier(u)
    v = (sym.table * u.grid.phases()) @ uhat
    return WaveField(u.grid, u.z, v)


def apply_op_adjoint(sym: Union[GridSymbol, SymbolModel], u: WaveField, z: float | None = None) -> WaveField:
    """Adjoint of apply_op in the discrete l2 inner product (matrix-free)."""
    if isinstance(sym, SymbolModel):
        sym = symbol_table(sym, u.grid, u.z if z is None else z)
    if sym.grid.n_points != u.grid.n_points:
        raise GridMismatchError("symbol and field grids differ")
    n = u.grid.n_points
    w = np.conj(sym.table * u.grid.phases()).T @ u.values  # w_k = sum_j conj(M_jk) u_j
    v = u.grid.phases() @ w / n
    return WaveField(u.grid, u.z, v)


def apply_multiplier(fk: np.ndarray, u: WaveField) -> WaveField:
    """Direct Fourier-multiplier path (reference for xi-only symbols)."""
    return from_fourier(u.grid, u.z, np.asarray(fk) * to_fourier(u))


def op_matrix(sym: Union[GridSymbol, SymbolModel], grid: Grid, z: float = 0.0) -> np.ndarray:
    """Dense matrix of Op(f); intended for debugging at small N."""
    if isinstance(sym, SymbolModel):
        sym = symbol_table(sym, grid, z)
    n = grid.n_points
    F = np.exp(-1j * np.outer(grid.freqs, grid.x)) / n
    return (sym.table * grid.phases()) @ F


def dealias_two_thirds(u: WaveField) -> WaveField:
    """Zero all modes with |k| > N/3 (idempotent spectral truncation)."""
    uhat = to_fourier(u)
    uhat[np.abs(u.grid.freqs) > u.grid.dealias_cut] = 0.0
    return from_fourier(u.grid, u.z, uhat)


def wave_packet(grid: Grid, center_k: int, x_center: float = 0.0, z: float = 0.0,
                sigma: float | None = None) -> WaveField:
    """Unit-norm Gaussian packet centered at wavenumber center_k and x_center.

    Default frequency width sigma = sqrt(center_k).
    """
    if sigma is None:
        sigma = float(np.sqrt(abs(center_k)))
    k = grid.freqs
    uhat = np.exp(-((k - center_k) ** 2) / (2.0 * sigma ** 2)) * np.exp(-1j * k * x_center)
    u = from_fourier(grid, z, uhat)
    u.values /= u.norm_l2()
    return u


def compose_symbols(f, g, n_terms: int, grid: Grid, z: float = 0.0) -> GridSymbol:
    """Truncated symbol composition sum_{m<n_terms} ((-i)^m / m!) d_xi^m f d_x^m g."""
    if n_terms < 1:
        raise ConfigError("n_terms must be >= 1")
    X = grid.x[:, None]
    K = grid.freqs[None, :]
    tab = None
    for m in range(n_terms):
        c = (-1j) ** m / factorial(m)
        term = c * np.asarray(f.jet(z, X, K, 0, m, 0)) * np.asarray(g.jet(z, X, K, m, 0, 0))
        tab = term if tab is None else tab + term
    tab = np.broadcast_to(np.asarray(tab, dtype=complex), (grid.n_points, grid.n_points))
    return GridSymbol(grid, z, tab.copy())
