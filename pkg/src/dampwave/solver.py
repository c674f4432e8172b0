"""Direct reference solver: spectral method of lines with fixed-step RK4.

Evolves du/dz = (i A - B) u (or the hyperbolic part alone) on the
periodic grid.  Experiment inputs are expected to pass through the
two-thirds spectral truncation before entering any x-dependent operator
pipeline; the stepping itself is the unprojected collocation dynamics
(the direct-summation quantization is alias-free per application).
For z-independent generators the RK4 step is precomputed as a matrix,
which is arithmetically equivalent to stage-wise RK4 for linear flows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, GridMismatchError, InstabilityError
from .quantize import Grid, WaveField, symbol_table, to_fourier
from .rays import cumulative_simpson_uniform
from .symbols import AssumptionParams, SymbolModel

NORM_BLOWUP_FACTOR = 1e6


@dataclass(frozen=True)
class IVPProblem:
    """Damped one-way initial value problem on a periodic grid."""

    b_model: SymbolModel
    params: AssumptionParams
    grid: Grid
    dz: float
    a_model: Optional[SymbolModel] = None
    bs_model: Optional[SymbolModel] = None

    def __post_init__(self):
        if self.dz <= 0:
            raise ConfigError("dz must be positive")
        cap = self.stability_cap()
        if self.dz > cap:
            raise ConfigError(f"dz={self.dz:g} exceeds the stability cap {cap:g}")

    def stability_cap(self) -> float:
        """dz <= 1 / ((1 + max|a_xi|) K_max + beta_max K_max^gamma), K_max = N/2."""
        kmax = self.grid.n_points // 2
        zs = (self.params.z0, 0.5 * (self.params.z0 + self.params.Z), self.params.Z)
        x = self.grid.x
        a_slope = 0.0
        if self.a_model is not None:
            for z in zs:
                for xi in (1.0, -1.0, kmax / 2.0, -kmax / 2.0, float(kmax), -float(kmax)):
                    a_slope = max(a_slope, float(np.max(np.abs(
                        self.a_model.jet(z, x, xi, 0, 1, 0)))))
        beta_max = 0.0
        for z in zs:
            for xi in (float(kmax), -float(kmax)):
                bv = np.real(self.b_model.value(z, x, xi))
                if self.bs_model is not None:
                    bv = bv + np.abs(self.bs_model.value(z, x, xi))
                beta_max = max(beta_max, float(np.max(bv)) / kmax ** self.params.gamma)
        return 1.0 / ((1.0 + a_slope) * kmax + beta_max * kmax ** self.params.gamma)

    @property
    def z_independent(self) -> bool:
        models = [self.b_model, self.a_model, self.bs_model]
        return all(m is None or m.z_independent for m in models)


@dataclass
class EvolutionTrace:
    z_samples: np.ndarray
    fields: list
    l2_norms: np.ndarray
    meta: dict = field(default_factory=dict)


def _generator_matrix(prob: IVPProblem, z: float, include_B: bool) -> np.ndarray:
    grid = prob.grid
    n = grid.n_points
    F = np.exp(-1j * np.outer(grid.freqs, grid.x)) / n
    G = np.zeros((n, n), dtype=complex)

    def op_mat(model):
        tab = symbol_table(model, grid, z).table
        return (tab * grid.phases()) @ F

    if prob.a_model is not None:
        G += 1j * op_mat(prob.a_model)
    if include_B:
        G -= op_mat(prob.b_model)
        if prob.bs_model is not None:
            G -= op_mat(prob.bs_model)
    return G


def _rk4_step_matrix(G: np.ndarray, h: float) -> np.ndarray:
    n = G.shape[0]
    eye = np.eye(n, dtype=complex)
    S = eye + (h / 4.0) * G
    S = eye + (h / 3.0) * (G @ S)
    S = eye + (h / 2.0) * (G @ S)
    return eye + h * (G @ S)


def evolve(
    prob: IVPProblem,
    u0: WaveField,
    z_to: float,
    include_B: bool = True,
    store_stride: int = 1,
) -> EvolutionTrace:
    """March the field from z0 to z_to; records every step's norm, and the
    field every ``store_stride`` steps (endpoints always included)."""
    params = prob.params
    if not (params.z0 <= z_to <= params.Z):
        raise ConfigError("z_to must lie in [z0, Z]")
    if u0.grid.n_points != prob.grid.n_points:
        raise GridMismatchError("initial data on the wrong grid")

    span = z_to - params.z0
    n_steps = max(1, int(round(span / prob.dz))) if span > 0 else 0
    h = span / n_steps if n_steps else 0.0
    zs = params.z0 + h * np.arange(n_steps + 1)

    u = u0.values.astype(complex).copy()
    norms = np.empty(n_steps + 1)
    w = 2.0 * np.pi / prob.grid.n_points
    norms[0] = np.sqrt(w * np.sum(np.abs(u) ** 2))
    fields = [WaveField(prob.grid, zs[0], u.copy())]
    floor0 = norms[0]

    if prob.z_independent:
        G = _generator_matrix(prob, params.z0, include_B)
        S = _rk4_step_matrix(G, h) if n_steps else None
        for m in range(n_steps):
            u = S @ u
            norms[m + 1] = np.sqrt(w * np.sum(np.abs(u) ** 2))
            if not np.isfinite(norms[m + 1]) or norms[m + 1] > NORM_BLOWUP_FACTOR * max(floor0, 1e-300):
                raise InstabilityError(f"norm blow-up at z={zs[m + 1]:.6g}; reduce dz")
            if (m + 1) % store_stride == 0 or m + 1 == n_steps:
                fields.append(WaveField(prob.grid, zs[m + 1], u.copy()))
    else:
        for m in range(n_steps):
            z = zs[m]
            G1 = _generator_matrix(prob, z, include_B)
            G2 = _generator_matrix(prob, z + h / 2.0, include_B)
            G4 = _generator_matrix(prob, z + h, include_B)
            k1 = G1 @ u
            k2 = G2 @ (u + h / 2.0 * k1)
            k3 = G2 @ (u + h / 2.0 * k2)
            k4 = G4 @ (u + h * k3)
            u = u + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            norms[m + 1] = np.sqrt(w * np.sum(np.abs(u) ** 2))
            if not np.isfinite(norms[m + 1]) or norms[m + 1] > NORM_BLOWUP_FACTOR * max(floor0, 1e-300):
                raise InstabilityError(f"norm blow-up at z={zs[m + 1]:.6g}; reduce dz")
            if (m + 1) % store_stride == 0 or m + 1 == n_steps:
                fields.append(WaveField(prob.grid, zs[m + 1], u.copy()))

    meta = {
        "include_B": include_B,
        "dz_effective": h,
        "dealias": "two_thirds_on_experiment_inputs",
        "store_stride": store_stride,
    }
    return EvolutionTrace(zs, fields, norms, meta)


def evolve_inverse_E0(prob: IVPProblem, u: WaveField, z_from: float, z_to: float) -> WaveField:
    """Integrate the hyperbolic flow from z_from back (or forward) to z_to."""
    params = prob.params
    for zz in (z_from, z_to):
        if not (params.z0 <= zz <= params.Z):
            raise ConfigError("depths must lie in [z0, Z]")
    span = z_to - z_from
    if span == 0.0 or prob.a_model is None:
        return WaveField(prob.grid, z_to, u.values.copy())
    n_steps = max(1, int(round(abs(span) / prob.dz)))
    h = span / n_steps
    v = u.values.astype(complex).copy()
    w = 2.0 * np.pi / prob.grid.n_points
    floor0 = np.sqrt(w * np.sum(np.abs(v) ** 2))
    if prob.z_independent:
        G = _generator_matrix(prob, params.z0, include_B=False)
        S = _rk4_step_matrix(G, h)
        for m in range(n_steps):
            v = S @ v
            nv = np.sqrt(w * np.sum(np.abs(v) ** 2))
            if not np.isfinite(nv) or nv > NORM_BLOWUP_FACTOR * max(floor0, 1e-300):
                raise InstabilityError("norm blow-up in inverse hyperbolic flow")
    else:
        for m in range(n_steps):
            z = z_from + m * h
            G1 = _generator_matrix(prob, z, False)
            G2 = _generator_matrix(prob, z + h / 2.0, False)
            G4 = _generator_matrix(prob, z + h, False)
            k1 = G1 @ v
            k2 = G2 @ (v + h / 2.0 * k1)
            k3 = G2 @ (v + h / 2.0 * k2)
            k4 = G4 @ (v + h * k3)
            v = v + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return WaveField(prob.grid, z_to, v)


@dataclass
class EnergyReport:
    lam: float
    p: str
    left: float
    right: float
    passed: bool
    slack: float = 1e-6


def energy_report(trace: EvolutionTrace, lam: float, p: str = "two") -> EnergyReport:
    """Scaled-energy check: weighted z-average of ||u|| against ||u(z0)||.

    left = (1/2 int (e^{-lam (z - z0)} ||u||)^p dz)^(1/p) for p = "two",
    or the max of the weighted norms for p = "infinity"; right = ||u(z0)||.
    """
    if p not in ("two", "infinity"):
        raise ConfigError("p must be 'two' or 'infinity'")
    if len(trace.z_samples) == 0:
        raise ConfigError("empty trace")
    zs = np.asarray(trace.z_samples)
    weighted = np.exp(-lam * (zs - zs[0])) * np.asarray(trace.l2_norms)
    right = float(trace.l2_norms[0])
    if p == "infinity":
        left = float(np.max(weighted))
    elif len(zs) == 1:
        left = 0.0
    else:
        h = zs[1] - zs[0]
        left = float(np.sqrt(0.5 * cumulative_simpson_uniform(weighted ** 2, h)[-1]))
    slack = 1e-6
    passed = left <= right + slack * max(1.0, right)
    return EnergyReport(lam, p, left, right, passed, slack)
