"""Analytic symbol families and their structural assumptions.

Shipped families (1-D, x on the circle of circumference 2*pi):

* hyperbolic transport  a(z, x, xi) = c0 (1 + eps_a cos x) xi
* multiplier damping    b(z, x, xi) = beta0 (1 + xi^2)^(gamma/2)
* cutoff damping        b(z, x, xi) = (1 + xi^2)^(gamma/2) w0 h(rho(z, x))
  with h(y) = exp(-1/y) for y > 0 (zero otherwise) and
  rho = r0 - cos(x - x_c) + s (z - z0)

The cutoff family vanishes to infinite order where rho <= 0, which is
the regime the damping-factor construction is designed for.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, UnsupportedOrderError
from .jets import (
    ChainJet,
    ConstJet,
    FuncJet,
    JetExpr,
    ProdJet,
    exp_inv_h,
    exp_inv_log_ratio,
    fd_jet,
    iso_power,
)
from .reports import EstimateReport, assemble_report

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# core containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymbolModel:
    """Evaluator for a symbol f(z, x, xi) with mixed partial derivatives.

    ``jet_expr`` carries closed-form derivatives when the family provides
    them; otherwise jets fall back to nested central differences with one
    Richardson level.
    """

    kind: str  # hyperbolic_a | dissipative_b | subprincipal_Bs | generic
    order_mu: float
    value_fn: Callable
    jet_expr: Optional[JetExpr] = None
    type_rho: float = 1.0
    type_delta: float = 0.0
    max_deriv_order: int = 8
    z_independent: bool = False
    x_independent: bool = False
    meta: dict = field(default_factory=dict)

    def value(self, z, x, xi):
        return self.value_fn(z, x, xi)

    def jet(self, z, x, xi, ax=0, bxi=0, jz=0):
        return eval_jet(self, z, x, xi, ax, bxi, jz)


def eval_jet(model: SymbolModel, z, x, xi, ax=0, bxi=0, jz=0):
    """d_x^ax d_xi^bxi d_z^jz of the symbol at (z, x, xi), vectorized."""
    if ax < 0 or bxi < 0 or jz < 0:
        raise ConfigError("derivative orders must be nonnegative")
    if ax + bxi + jz > model.max_deriv_order:
        raise UnsupportedOrderError(
            f"order {(ax, bxi, jz)} exceeds max_deriv_order={model.max_deriv_order}"
        )
    if model.z_independent and jz > 0:
        shape = np.broadcast_shapes(np.shape(x), np.shape(xi))
        return np.zeros(shape)
    if model.jet_expr is not None:
        return model.jet_expr.jet(z, x, xi, ax, bxi, jz)
    return fd_jet(model.value_fn, z, x, xi, ax, bxi, jz)


@dataclass(frozen=True)
class AssumptionParams:
    """Structural parameters: damping order gamma, flatness order L, depth range."""

    gamma: float
    L: int
    Z: float
    z0: float = 0.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")
        if self.L < 2:
            raise ConfigError("L must be an integer >= 2")
        if 2.0 * self.gamma >= self.L:
            raise ConfigError(f"need 2*gamma < L, got gamma={self.gamma}, L={self.L}")
        if not self.z0 < self.Z:
            raise ConfigError("need z0 < Z")

    @property
    def rho_type(self) -> float:
        return 1.0 - self.gamma / self.L

    @property
    def delta_type(self) -> float:
        return self.gamma / self.L


@dataclass(frozen=True)
class CutoffFamily:
    """Damping symbol built from a scalar cutoff h and a boundary function rho.

    ``weight_w0`` and ``rho_fn`` take (z, x, omega) with omega = sign(xi);
    when jet-capable expressions are supplied, the resulting symbol carries
    closed-form derivatives.
    """

    gamma: float
    L: int
    weight_w0: Callable
    rho_fn: Callable
    h_kind: str = "exp_inv"
    beta: float = 0.5
    w0_expr: Optional[JetExpr] = None
    rho_expr: Optional[JetExpr] = None
    h_derivs: Optional[Callable] = None  # (y, j) -> jth derivative, for custom h
    rho_inverse: Optional[Callable] = None  # rho target -> x at z = z0, omega = +1
    z_independent: bool = False
    params: dict = field(default_factory=dict)

    def h(self, y, j: int = 0):
        if self.h_kind == "exp_inv":
            return exp_inv_h(y, j)
        if self.h_derivs is None:
            raise ConfigError("custom h requires h_derivs")
        return self.h_derivs(y, j)

    def __post_init__(self):
        if self.h_kind not in ("exp_inv", "custom"):
            raise ConfigError(f"unknown h_kind {self.h_kind!r}")
        if self.beta <= 0:
            raise ConfigError("beta must be positive")
        if 2.0 * self.gamma >= self.L:
            raise ConfigError("need 2*gamma < L")
        # h must vanish on (-inf, 0] and be positive on (0, beta]
        y = np.concatenate([np.linspace(-1.0, 0.0, 33), np.logspace(-4, np.log10(self.beta), 33)])
        hv = self.h(y, 0)
        if np.any(hv[y <= 0] != 0.0) or np.any(hv[y > 1e-2] <= 0.0):
            raise ConfigError("h must vanish for y <= 0 and be positive for y > 0")


def _omega(xi):
    return np.where(np.asarray(xi) < 0, -1.0, 1.0)


# ---------------------------------------------------------------------------
# shipped families
# ---------------------------------------------------------------------------

def _xi_power_leaf(gamma: float) -> JetExpr:
    def fn(z, x, xi, ax, bxi, jz):
        shape = np.broadcast_shapes(np.shape(x), np.shape(xi))
        if ax or jz:
            return np.zeros(shape)
        return np.broadcast_to(iso_power(xi, gamma, bxi), shape).copy()

    return FuncJet(fn)


def hyperbolic_a(c0: float = 0.7, eps_a: float = 0.1) -> SymbolModel:
    """Transport symbol a = c0 (1 + eps_a cos x) xi."""

    def value(z, x, xi):
        return c0 * (1.0 + eps_a * np.cos(np.asarray(x, dtype=float))) * np.asarray(xi, dtype=float)

    def jet_fn(z, x, xi, ax, bxi, jz):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        shape = np.broadcast_shapes(x.shape, xi.shape)
        if jz > 0 or bxi > 1:
            return np.zeros(shape)
        if ax == 0:
            xfac = c0 * (1.0 + eps_a * np.cos(x))
        else:
            xfac = c0 * eps_a * np.cos(x + ax * np.pi / 2.0)
        out = xfac if bxi == 1 else xfac * xi
        return np.broadcast_to(out, shape).copy()

    return SymbolModel(
        kind="hyperbolic_a",
        order_mu=1.0,
        value_fn=value,
        jet_expr=FuncJet(jet_fn),
        z_independent=True,
        x_independent=(eps_a == 0.0),
        meta={"c0": c0, "eps_a": eps_a},
    )


def multiplier_b(beta0: float = 0.5, gamma: float = 1.0) -> SymbolModel:
    """x-independent damping multiplier b = beta0 (1 + xi^2)^(gamma/2)."""
    if beta0 < 0:
        raise ConfigError("beta0 must be nonnegative")

    def value(z, x, xi):
        shape = np.broadcast_shapes(np.shape(x), np.shape(xi))
        return np.broadcast_to(beta0 * iso_power(xi, gamma, 0), shape).copy()

    expr = ProdJet(ConstJet(beta0), _xi_power_leaf(gamma))
    return SymbolModel(
        kind="dissipative_b",
        order_mu=gamma,
        value_fn=value,
        jet_expr=expr,
        z_independent=True,
        x_independent=True,
        meta={"beta0": beta0, "gamma": gamma},
    )


def zero_symbol(kind: str = "subprincipal_Bs") -> SymbolModel:
    def value(z, x, xi):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(xi)))

    return SymbolModel(
        kind=kind,
        order_mu=-np.inf,
        value_fn=value,
        jet_expr=ConstJet(0.0),
        z_independent=True,
        x_independent=True,
    )


def shipped_cutoff_family(
    gamma: float = 1.0,
    L: int = 4,
    r0: float = 0.3,
    x_c: float = 0.0,
    s: float = 0.0,
    beta0: float = 4.0,
    beta: float = 0.5,
    z0: float = 0.0,
) -> CutoffFamily:
    """Cutoff family with rho = r0 - cos(x - x_c) + s (z - z0), w0 = beta0."""
    if beta0 <= 0:
        raise ConfigError("beta0 must be positive")

    def rho_fn(z, x, omega):
        return r0 - np.cos(np.asarray(x, dtype=float) - x_c) + s * (z - z0)

    def w0_fn(z, x, omega):
        return beta0 * np.ones(np.shape(x))

    def rho_jet(z, x, xi, ax, bxi, jz):
        x = np.asarray(x, dtype=float)
        shape = np.broadcast_shapes(x.shape, np.shape(xi))
        if bxi > 0:
            return np.zeros(shape)
        if jz > 0:
            if ax == 0 and jz == 1:
                return np.full(shape, s)
            return np.zeros(shape)
        if ax == 0:
            out = r0 - np.cos(x - x_c) + s * (z - z0)
        else:
            out = -np.cos(x - x_c + ax * np.pi / 2.0)
        return np.broadcast_to(out, shape).copy()

    def rho_inverse(target):
        t = np.asarray(target, dtype=float)
        c = r0 - t
        if np.any(np.abs(c) > 1.0):
            raise ConfigError("rho target outside the range of the shipped family")
        return x_c + np.arccos(c)

    return CutoffFamily(
        gamma=gamma,
        L=L,
        weight_w0=w0_fn,
        rho_fn=rho_fn,
        h_kind="exp_inv",
        beta=beta,
        w0_expr=ConstJet(beta0),
        rho_expr=FuncJet(rho_jet),
        rho_inverse=rho_inverse,
        z_independent=(s == 0.0),
        params={"gamma": gamma, "L": L, "r0": r0, "x_c": x_c, "s": s, "beta0": beta0, "z0": z0},
    )


def build_cutoff_b(family: CutoffFamily) -> SymbolModel:
    """Damping symbol b = (1 + xi^2)^(gamma/2) w0 h(rho) from a cutoff family."""
    zs = np.linspace(-1.0, 7.0, 9)
    xs = np.linspace(0.0, TWO_PI, 65)
    w0_min = min(
        float(np.min(family.weight_w0(z, xs, om))) for z in zs for om in (-1.0, 1.0)
    )
    if not w0_min > 0.0:
        raise ConfigError("weight_w0 must be bounded below by a positive constant")

    gamma, L = family.gamma, family.L

    def value(z, x, xi):
        xi = np.asarray(xi, dtype=float)
        om = _omega(xi)
        return (
            iso_power(xi, gamma, 0)
            * family.weight_w0(z, x, om)
            * family.h(family.rho_fn(z, x, om), 0)
        )

    jet_expr = None
    if family.rho_expr is not None and family.w0_expr is not None:
        h_derivs = exp_inv_h if family.h_kind == "exp_inv" else family.h_derivs
        jet_expr = ProdJet(
            ProdJet(_xi_power_leaf(gamma), family.w0_expr),
            ChainJet(lambda y, m: h_derivs(y, m), family.rho_expr),
        )

    return SymbolModel(
        kind="dissipative_b",
        order_mu=gamma,
        value_fn=value,
        jet_expr=jet_expr,
        type_rho=1.0 - gamma / L,
        type_delta=gamma / L,
        z_independent=family.z_independent,
        x_independent=False,
        meta={"family": family, "w0_min": w0_min},
    )


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleSpec:
    """(z, x) sample plan: cutoff-spanning x targets plus seeded random x.

    The x targets sweep the damping level rho logarithmically from deep
    inside the transition region (rho_lo) up to the family maximum, so
    both the vanishing boundary and the fully damped zone are covered.
    Refinement by an integer factor keeps the original points as a
    subset, making sup-style statistics monotone under refinement.
    The z window starts at z0 + z_lo_offset; when the offset is None it
    defaults to 5% of the depth span.
    """

    n_z: int = 16
    n_x_boundary: int = 64
    n_x_random: int = 8
    seed: int = 1234
    rho_lo: float = 2e-3
    rho_hi: Optional[float] = None  # None: the family's maximum rho
    z_lo_offset: Optional[float] = None  # None: 0.05 * (Z - z0)

    def refined(self, factor: int = 4) -> "SampleSpec":
        def bump(n):
            return factor * (n - 1) + 1 if n > 1 else n

        return SampleSpec(
            n_z=bump(self.n_z),
            n_x_boundary=bump(self.n_x_boundary),
            n_x_random=factor * self.n_x_random,
            seed=self.seed,
            rho_lo=self.rho_lo,
            rho_hi=self.rho_hi,
            z_lo_offset=self.z_lo_offset,
        )

    def build(self, params: AssumptionParams, family: Optional[CutoffFamily] = None):
        off = self.z_lo_offset
        if off is None:
            off = 0.05 * (params.Z - params.z0)
        zs = np.linspace(params.z0 + off, params.Z, self.n_z)
        xs = []
        if family is not None and family.rho_inverse is not None and self.n_x_boundary:
            hi = self.rho_hi
            if hi is None:
                hi = family.params.get("r0", 0.0) + 1.0 if family.params else 1.0
            targets = np.logspace(np.log10(self.rho_lo), np.log10(hi), self.n_x_boundary)
            xs.append(np.asarray(family.rho_inverse(targets), dtype=float))
        elif self.n_x_boundary:
            xs.append(np.linspace(0.0, TWO_PI, self.n_x_boundary, endpoint=False))
        if self.n_x_random:
            rng = np.random.default_rng(self.seed)
            xs.append(rng.uniform(0.0, TWO_PI, self.n_x_random))
        return zs, np.concatenate(xs)


def dyadic_ladder(m_lo: int = 3, m_hi: int = 8) -> np.ndarray:
    return 2.0 ** np.arange(m_lo, m_hi + 1)


# ---------------------------------------------------------------------------
# structural checks
# ---------------------------------------------------------------------------

def check_h_inequality(
    family: CutoffFamily,
    j_max: int,
    grid: Sequence[float],
    cap: float = 1e12,
) -> EstimateReport:
    """sup over the grid of |h^(j)(y)| / h(y)^(1 - j/L) for j = 1..j_max."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ConfigError("empty grid")
    if np.any(grid <= 0.0) or np.any(grid > family.beta):
        raise ConfigError("grid must lie in (0, beta]")
    if j_max > family.L - 1:
        raise ConfigError("j_max must be <= L - 1")

    orders, sups = [], []
    if j_max == 0:
        orders, sups = [0], [1.0]
    for j in range(1, j_max + 1):
        if family.h_kind == "exp_inv":
            sup = float(np.exp(np.max(exp_inv_log_ratio(grid, j, j / family.L))))
        else:
            h0 = family.h(grid, 0)
            hj = np.abs(family.h(grid, j))
            sup = float(np.max(hj / h0 ** (1.0 - j / family.L)))
        orders.append(j)
        sups.append(sup)

    margins = [s - cap for s in sups]
    return EstimateReport(
        claim_id="h_derivative_bounds",
        orders_tested=orders,
        fitted_exponents=[None] * len(orders),
        bound_exponents=[0.0] * len(orders),
        margins=margins,
        sup_constants=sups,
        passed=all(np.isfinite(s) and s <= cap for s in sups),
        tolerance=0.0,
        extras={"cap": cap, "L": family.L, "grid_min": float(grid.min()), "grid_max": float(grid.max())},
    )


def check_assumption_b1(
    model: SymbolModel,
    params: AssumptionParams,
    orders: Sequence[tuple],
    sample_spec: Optional[SampleSpec] = None,
    ladder: Optional[np.ndarray] = None,
    cap: float = 1e3,
) -> EstimateReport:
    """Structural bound on damping derivatives up to total order < L.

    For each order the reported constant is the sup over a dyadic frequency
    ladder and a (z, x) sample set of

        |d^order b| / [ (1+|xi|)^(-bxi + (ax+bxi+jz) gamma/L)
                        (1+b)^(1 - (ax+bxi+jz)/L) ].
    """
    if model.kind != "dissipative_b":
        raise ConfigError("check_assumption_b1 expects a dissipative_b model")
    spec = sample_spec or SampleSpec()
    family = model.meta.get("family")
    zs, xs = spec.build(params, family)
    ladder = dyadic_ladder() if ladder is None else np.asarray(ladder, dtype=float)
    gamma, L = params.gamma, params.L

    sups = []
    for (ax, bxi, jz) in orders:
        total = ax + bxi + jz
        if total >= L:
            raise ConfigError(f"order {(ax, bxi, jz)} must have total < L={L}")
        sup = 0.0
        for K in ladder:
            for xi in (K, -K):
                for z in zs:
                    num = np.abs(model.jet(z, xs, xi, ax, bxi, jz))
                    b0 = np.real(model.jet(z, xs, xi, 0, 0, 0))
                    den = (1.0 + abs(xi)) ** (-bxi + total * gamma / L) * (
                        1.0 + b0
                    ) ** (1.0 - total / L)
                    sup = max(sup, float(np.max(num / den)))
        sups.append(sup)

    margins = [s - cap for s in sups]
    return EstimateReport(
        claim_id="structural_bound_b",
        orders_tested=[tuple(o) for o in orders],
        fitted_exponents=[None] * len(orders),
        bound_exponents=[0.0] * len(orders),
        margins=margins,
        sup_constants=sups,
        passed=all(np.isfinite(s) and s <= cap for s in sups),
        tolerance=0.0,
        extras={"cap": cap, "ladder": [float(k) for k in ladder], "n_samples": len(zs) * len(xs)},
    )
