"""Quantifies the leading-order conjugation approximation.

Compares E0(z, z0)^{-1} Op(b) E0(z, z0) u against Op(b o Phi_{z,z0}) u on
band-limited wave packets; the relative gap measures the remainder left
by replacing the conjugated operator with the flow pullback of its
principal symbol.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .quantize import GridSymbol, WaveField, apply_op, dealias_two_thirds, wave_packet
from .rays import flow_map
from .solver import IVPProblem, evolve, evolve_inverse_E0

_NORM_FLOOR = 1e-30


@dataclass
class ConjugationProbe:
    z: float
    band_K: int
    conj_result: WaveField
    pullback_result: WaveField
    rel_error: float


def pullback_symbol_table(prob: IVPProblem, z: float, flow_dz: float = 1e-3) -> GridSymbol:
    """Tabulate b(z, Phi_{z,z0}(x, xi)) on the grid via batched ray tracing."""
    grid = prob.grid
    n = grid.n_points
    X = np.repeat(grid.x, n).reshape(n, n)
    XI = np.tile(grid.freqs, (n, 1))
    z0 = prob.params.z0
    if z > z0:
        n_steps = max(1, int(round((z - z0) / flow_dz)))
        _, xs, xis = flow_map(prob.a_model, z0, z, X, XI, n_steps, guard=False)
        X, XI = xs[-1], xis[-1]
    tab = np.real(prob.b_model.value(z, X, XI))
    if np.any(tab < -1e-12):
        raise ConfigError("pullback of a nonnegative symbol came out negative")
    return GridSymbol(grid, z, np.maximum(tab, 0.0).astype(complex))


def conjugation_error(
    prob: IVPProblem,
    z: float,
    band_K: int,
    x_center: Optional[float] = None,
    flow_dz: float = 1e-3,
) -> ConjugationProbe:
    """One probe: conjugated application vs flow pullback at band center K."""
    if prob.a_model is None:
        raise ConfigError("conjugation_error requires an A term")
    if band_K > prob.grid.n_points // 3:
        raise ConfigError("band_K must be at most N/3")
    if band_K < 1:
        raise ConfigError("band_K must be positive")
    if x_center is None:
        # center the packet where the damping is strongest at the band
        tab = np.real(prob.b_model.value(prob.params.z0, prob.grid.x, float(band_K)))
        x_center = float(prob.grid.x[int(np.argmax(tab))])

    u = dealias_two_thirds(wave_packet(prob.grid, band_K, x_center, z=prob.params.z0))
    fwd = evolve(prob, u, z, include_B=False).fields[-1]
    bu = apply_op(prob.b_model, fwd, z=z)
    conj = evolve_inverse_E0(prob, bu, z, prob.params.z0)

    pull = apply_op(pullback_symbol_table(prob, z, flow_dz), u)

    num = np.linalg.norm(conj.values - pull.values)
    den = max(np.linalg.norm(pull.values), _NORM_FLOOR)
    return ConjugationProbe(z=z, band_K=band_K, conj_result=conj,
                            pullback_result=pull, rel_error=float(num / den))


def conjugation_slope(probes) -> float:
    """Fitted log2 slope of rel_error against band center."""
    ks = np.array([p.band_K for p in probes], dtype=float)
    errs = np.array([max(p.rel_error, 1e-300) for p in probes])
    if len(ks) < 2:
        return float("-inf")
    return float(np.polyfit(np.log2(ks), np.log2(errs), 1)[0])
