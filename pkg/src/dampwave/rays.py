"""Bicharacteristic ray tracing and damping integrals along rays.

Rays solve dx/dz = -da/dxi, dxi/dz = +da/dx with a fixed-step RK4
integrator; the damping integrals accumulate b along a ray by composite
Simpson quadrature on the same z grid the ray is sampled on.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DegenerateCovectorError, RayBlowupError
from .symbols import SymbolModel

XI_MIN, XI_MAX = 1e-8, 1e8


@dataclass(frozen=True)
class RaySystem:
    a_model: SymbolModel
    z0: float = 0.0
    step_dz: float = 1e-3
    integrator: str = "rk4"

    def __post_init__(self):
        if self.step_dz <= 0:
            raise ConfigError("step_dz must be positive")
        if self.integrator != "rk4":
            raise ConfigError("only the rk4 integrator is supported")
        if self.a_model.kind != "hyperbolic_a":
            raise ConfigError("ray system requires a hyperbolic_a symbol")


@dataclass
class RaySolution:
    z_samples: np.ndarray
    gamma_x: np.ndarray
    gamma_xi: np.ndarray
    I_forward: np.ndarray
    direction: str  # from_z0 | to_z0


def _hamilton_rhs(a_model: SymbolModel, z, x, xi):
    dx = -a_model.jet(z, x, xi, 0, 1, 0)
    dxi = a_model.jet(z, x, xi, 1, 0, 0)
    return dx, dxi


def flow_map(
    a_model: SymbolModel,
    z_from: float,
    z_to: float,
    x0,
    xi0,
    n_steps: int,
    guard: bool = True,
):
    """RK4 bicharacteristic flow for arrays of initial data; returns samples
    at all n_steps+1 uniform nodes (arrays of shape (n_steps+1,) + data shape)."""
    x = np.array(x0, dtype=float, copy=True)
    xi = np.array(xi0, dtype=float, copy=True)
    h = (z_to - z_from) / n_steps
    zs = z_from + h * np.arange(n_steps + 1)
    xs = np.empty((n_steps + 1,) + x.shape)
    xis = np.empty((n_steps + 1,) + xi.shape)
    xs[0], xis[0] = x, xi
    for m in range(n_steps):
        z = zs[m]
        k1x, k1s = _hamilton_rhs(a_model, z, x, xi)
        k2x, k2s = _hamilton_rhs(a_model, z + h / 2, x + h / 2 * k1x, xi + h / 2 * k1s)
        k3x, k3s = _hamilton_rhs(a_model, z + h / 2, x + h / 2 * k2x, xi + h / 2 * k2s)
        k4x, k4s = _hamilton_rhs(a_model, z + h, x + h * k3x, xi + h * k3s)
        x = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        xi = xi + h / 6 * (k1s + 2 * k2s + 2 * k3s + k4s)
        if guard:
            mag = np.abs(xi)
            if np.any((mag < XI_MIN) | (mag > XI_MAX)):
                raise RayBlowupError(
                    f"ray frequency left [{XI_MIN:g}, {XI_MAX:g}] at z={zs[m + 1]:.6g}"
                )
        xs[m + 1], xis[m + 1] = x, xi
    return zs, xs, xis


def cumulative_simpson_uniform(y: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """Cumulative integral of uniformly sampled y, Simpson-accurate.

    Even prefixes are composite Simpson; an odd interior node m adds the
    integral of [m-1, m] under the quadratic through (m-1, m, m+1), and a
    trailing odd node uses the backward window (same rules as scipy's
    cumulative Simpson).
    """
    y = np.moveaxis(np.asarray(y), axis, 0)
    n = y.shape[0]
    out = np.zeros_like(y, dtype=np.result_type(y.dtype, float))
    if n == 1:
        return np.moveaxis(out, 0, axis)
    if n == 2:
        out[1] = h * (y[0] + y[1]) / 2.0
        return np.moveaxis(out, 0, axis)
    for m in range(1, n):
        if m % 2 == 0:
            out[m] = out[m - 2] + h / 3.0 * (y[m - 2] + 4.0 * y[m - 1] + y[m])
        elif m + 1 < n:
            out[m] = out[m - 1] + h / 12.0 * (5.0 * y[m - 1] + 8.0 * y[m] - y[m + 1])
        else:
            out[m] = out[m - 1] + h / 12.0 * (-y[m - 2] + 8.0 * y[m - 1] + 5.0 * y[m])
    return np.moveaxis(out, 0, axis)


def _even_steps(span: float, dz: float) -> int:
    n = max(2, int(round(abs(span) / dz)))
    return n + (n % 2)


def trace_ray(
    sys: RaySystem,
    z_from: float,
    z_to: float,
    x0: float,
    xi0: float,
    b_model: Optional[SymbolModel] = None,
) -> RaySolution:
    """Trace one ray between depths; optionally accumulate the damping integral.

    ``I_forward`` holds the cumulative integral of b along the ray from
    z_from (zeros when no b_model is given); it is clipped to be
    nondecreasing, which is exact for b >= 0 up to quadrature wiggle.
    """
    if xi0 == 0.0:
        raise DegenerateCovectorError("ray initial frequency must be nonzero")
    if z_to == z_from:
        z = np.array([z_from])
        i0 = np.zeros(1)
        return RaySolution(z, np.array([float(x0)]), np.array([float(xi0)]), i0, "from_z0")
    n = _even_steps(z_to - z_from, sys.step_dz)
    zs, xs, xis = flow_map(sys.a_model, z_from, z_to, float(x0), float(xi0), n)
    if b_model is not None:
        bvals = np.array([np.real(b_model.value(z, x, xi)) for z, x, xi in zip(zs, xs, xis)])
        h = (z_to - z_from) / n
        I = cumulative_simpson_uniform(bvals, h)
        # b >= 0 makes the cumulative integral monotone in z; clip quadrature wiggle
        sgn = 1.0 if z_to > z_from else -1.0
        I = sgn * np.maximum.accumulate(np.maximum(sgn * I, 0.0))
    else:
        I = np.zeros_like(zs)
    direction = "from_z0" if z_to > z_from else "to_z0"
    return RaySolution(zs, xs, xis, I, direction)


def damping_integral_I(
    sys: RaySystem,
    b_model: SymbolModel,
    z: float,
    x: float,
    xi: float,
    quad_dz: float = 1e-2,
) -> float:
    """Accumulated damping from z0 up to z along the ray hitting (x, xi) at z."""
    if z < sys.z0:
        raise ConfigError("z must be >= z0")
    if xi == 0.0:
        raise DegenerateCovectorError("xi must be nonzero")
    if z == sys.z0:
        return 0.0
    n = _even_steps(z - sys.z0, quad_dz)
    # trace backward from (x, xi) at depth z down to z0, then integrate forward
    zs, xs, xis = flow_map(sys.a_model, z, sys.z0, float(x), float(xi), n)
    zs, xs, xis = zs[::-1], xs[::-1], xis[::-1]
    bvals = np.array([np.real(b_model.value(zv, xv, xiv)) for zv, xv, xiv in zip(zs, xs, xis)])
    h = (z - sys.z0) / n
    val = float(cumulative_simpson_uniform(bvals, h)[-1])
    return max(val, 0.0)


def damping_integral_Itilde(
    sys: RaySystem,
    b_model: SymbolModel,
    z: float,
    x0: float,
    xi0: float,
    quad_dz: float = 1e-2,
) -> float:
    """Accumulated damping along the forward ray started at (x0, xi0) at z0."""
    if z < sys.z0:
        raise ConfigError("z must be >= z0")
    if xi0 == 0.0:
        raise DegenerateCovectorError("xi0 must be nonzero")
    if z == sys.z0:
        return 0.0
    n = _even_steps(z - sys.z0, quad_dz)
    zs, xs, xis = flow_map(sys.a_model, sys.z0, z, float(x0), float(xi0), n)
    bvals = np.array([np.real(b_model.value(zv, xv, xiv)) for zv, xv, xiv in zip(zs, xs, xis)])
    h = (z - sys.z0) / n
    val = float(cumulative_simpson_uniform(bvals, h)[-1])
    return max(val, 0.0)
