"""Order-by-order damping-factor construction W = (1 + sum_j K^(j)) exp(-I).

For A = 0 the accumulated damping is I(z, x, xi) = int_{z0}^z b dz' and the
corrections K^(j) are built recursively: with

    M^(k)(K) = sum_{m + j = k, j <= 1} ((-i)^m / m!) e^{I}
               d_xi^m B^(j) d_x^m (K e^{-I}),      B^(0) = b, B^(1) = B_s,

the diagonal residuals satisfy r^(1,l) = M^(l)(1), r^(k, k-1+l) =
r^(k-1, k-1+l) + M^(l)(K^(k-1)), and K^(k)(z) = -int_{z0}^z r^(k,k) dz'.
Off-diagonal entries r^(k,l), l < k, vanish identically once K^(1..k-1)
are installed.  Tables are evaluated on a uniform z quadrature ladder
(composite Simpson; x / xi derivatives taken under the integral sign);
correction orders J <= 2 are supported.

For A != 0 the damping symbol is pulled back along the bicharacteristic
flow and the A = 0 construction runs on the transported problem.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial
from typing import Optional

import numpy as np

from .errors import ConfigError, GridMismatchError, QuadratureError
from .jets import ConstJet, DerivJet, FuncJet, JetExpr, ProdJet, SumJet
from .quantize import Grid, GridSymbol, WaveField, apply_op, dealias_two_thirds
from .rays import cumulative_simpson_uniform, flow_map
from .solver import IVPProblem, evolve
from .symbols import SymbolModel

_MAX_J = 2
_CHUNK = 8192


def _ladder(z0: float, z_hi: float, quad_dz: float):
    n = max(2, int(round((z_hi - z0) / quad_dz)))
    n += n % 2
    return z0 + (z_hi - z0) / n * np.arange(n + 1), (z_hi - z0) / n


def _targets_to_nodes(zs, z_targets):
    idx = []
    for zt in z_targets:
        j = int(round((zt - zs[0]) / (zs[1] - zs[0])))
        if j < 0 or j >= len(zs) or abs(zs[j] - zt) > 1e-9 * max(1.0, abs(zt)):
            raise QuadratureError(f"target z={zt} is not on the quadrature ladder")
        idx.append(j)
    return idx


# ---------------------------------------------------------------------------
# table engine
# ---------------------------------------------------------------------------

def _damping_tables(bjet, bsjet, zs, h, J, z_independent) -> dict:
    """Ladder tables of I-jets, K^(1..J) and residual coefficients.

    ``bjet(order, node)`` returns the b-jet array at a ladder node (node
    ignored when z_independent); all outputs carry the node axis first.
    """
    n_nodes = len(zs)

    def ladder(fn, order):
        if z_independent:
            return fn(order, 0)[None]
        return np.stack([fn(order, m) for m in range(n_nodes)])

    out = {}
    b = ladder(bjet, (0, 0))
    full = (n_nodes,) + b.shape[1:]
    out["b"] = np.broadcast_to(b, full)
    I = cumulative_simpson_uniform(out["b"], h)
    # b >= 0: clip the odd-node quadrature wiggle so I stays monotone
    I = np.maximum.accumulate(np.maximum(I, 0.0), axis=0)
    out["I"] = I

    if J >= 1:
        bxi = np.broadcast_to(ladder(bjet, (0, 1)), full)
        Ix = cumulative_simpson_uniform(np.broadcast_to(ladder(bjet, (1, 0)), full), h)
        out["Ix"] = Ix
        r11 = 1j * bxi * Ix
        if bsjet is not None:
            r11 = r11 + np.broadcast_to(ladder(bsjet, (0, 0)), full)
        out["r11"] = r11
        out["K1"] = -cumulative_simpson_uniform(r11, h)

    if J >= 2:
        bxix = np.broadcast_to(ladder(bjet, (1, 1)), full)
        bxixi = np.broadcast_to(ladder(bjet, (0, 2)), full)
        Ixx = cumulative_simpson_uniform(np.broadcast_to(ladder(bjet, (2, 0)), full), h)
        out["Ixx"] = Ixx
        k1x_int = 1j * (bxix * Ix + bxi * Ixx)
        if bsjet is not None:
            k1x_int = k1x_int + np.broadcast_to(ladder(bsjet, (1, 0)), full)
        K1x = -cumulative_simpson_uniform(k1x_int, h)
        out["K1x"] = K1x
        r12 = -0.5 * bxixi * (Ix ** 2 - Ixx)
        if bsjet is not None:
            r12 = r12 + 1j * np.broadcast_to(ladder(bsjet, (0, 1)), full) * Ix
        M21 = -1j * bxi * (K1x - out["K1"] * Ix)
        if bsjet is not None:
            M21 = M21 + np.broadcast_to(ladder(bsjet, (0, 0)), full) * out["K1"]
        out["r12"] = r12
        out["M21"] = M21
        out["r22"] = r12 + M21
        out["K2"] = -cumulative_simpson_uniform(out["r22"], h)

    return out


_TABLE_KEYS = ("I", "Ix", "Ixx", "K1", "K1x", "K2", "r11", "r12", "M21", "r22", "b")


def _finalize_tables(tab: dict, J: int) -> None:
    W = np.ones_like(tab["I"], dtype=complex)
    dzK = np.zeros_like(tab["I"], dtype=complex)
    if J >= 1:
        W = W + tab["K1"]
        dzK = dzK - tab["r11"]
    if J >= 2:
        W = W + tab["K2"]
        dzK = dzK - tab["r22"]
    expI = np.exp(-tab["I"])
    tab["W"] = W * expI
    tab["dzW"] = (dzK - W * tab["b"]) * expI


# ---------------------------------------------------------------------------
# jet providers
# ---------------------------------------------------------------------------

class _ModelProvider:
    """b-jets of a SymbolModel on flat sample arrays; caches z-independent jets."""

    def __init__(self, model: SymbolModel, zs, X, XI):
        self.model = model
        self.zs = zs
        self.X = X
        self.XI = XI
        self.z_independent = model.z_independent
        self._cache: dict = {}

    def __call__(self, order, node=0):
        if self.z_independent:
            if order not in self._cache:
                self._cache[order] = np.asarray(
                    self.model.jet(self.zs[0], self.X, self.XI, order[0], order[1], 0))
            return self._cache[order]
        return np.asarray(self.model.jet(self.zs[node], self.X, self.XI, order[0], order[1], 0))


class _FlowProvider:
    """Jets of the transported damping symbol b(z, Phi_{z,z0}(x, xi)) on a grid.

    Values come from marching the bicharacteristic flow of every grid node;
    x-derivatives are spectral along the x axis, xi-derivatives central
    differences across the integer frequency ladder.
    """

    z_independent = False

    def __init__(self, a_model, b_model, grid: Grid, zs, flow_dz=1e-3):
        n = grid.n_points
        X = np.repeat(grid.x, n).reshape(n, n)
        XI = np.tile(grid.freqs, (n, 1))
        sub = max(1, int(round((zs[1] - zs[0]) / flow_dz))) if len(zs) > 1 else 1
        self._tables = [np.real(b_model.value(zs[0], X, XI))]
        for m in range(len(zs) - 1):
            _, xs, xis = flow_map(a_model, zs[m], zs[m + 1], X, XI, sub, guard=False)
            X, XI = xs[-1], xis[-1]
            self._tables.append(np.real(b_model.value(zs[m + 1], X, XI)))
        ks = grid.freqs
        self._sort = np.argsort(ks)
        self._unsort = np.argsort(self._sort)
        self._ik = 1j * ks[:, None]

    def _dx(self, T):
        return np.real(np.fft.ifft(self._ik * np.fft.fft(T, axis=0), axis=0))

    def _dxi(self, T):
        Ts = T[:, self._sort]
        out = np.empty_like(Ts)
        out[:, 1:-1] = (Ts[:, 2:] - Ts[:, :-2]) / 2.0
        out[:, 0] = Ts[:, 1] - Ts[:, 0]
        out[:, -1] = Ts[:, -1] - Ts[:, -2]
        return out[:, self._unsort]

    def __call__(self, order, node):
        T = self._tables[node]
        for _ in range(order[0]):
            T = self._dx(T)
        for _ in range(order[1]):
            T = self._dxi(T)
        return T


# ---------------------------------------------------------------------------
# public containers
# ---------------------------------------------------------------------------

@dataclass
class CompositionLedger:
    """Composition terms retained for inspection.

    M_table[(j, k)] holds the k-th composition term generated by K^(j-1);
    r_table[(k, l)] the residual coefficient tables at the tabulated z.
    Entries with l < k vanish by construction once K^(1..k-1) are
    installed; they are stored explicitly so the cancellation is testable.
    """

    M_table: dict = field(default_factory=dict)
    r_table: dict = field(default_factory=dict)


class ParametrixSymbol:
    """Assembled damping-factor symbol (1 + sum_j K^(j)) exp(-I) for A = 0."""

    def __init__(self, b_model, bs_model, params, order_J, quad_dz, grid=None):
        if order_J < 0 or order_J > _MAX_J:
            raise ConfigError(f"J must be between 0 and {_MAX_J}")
        self.b_model = b_model
        self.bs_model = bs_model
        self.params = params
        self.order_J = order_J
        self.quad_dz = quad_dz
        self.grid = grid
        self.tables: dict[float, dict] = {}
        self.ledger = CompositionLedger()

    # -- pointwise evaluators (fresh quadrature ladder per call) --------

    def _pointwise(self, z, x, xi):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        X, XI = np.broadcast_arrays(x, xi)
        shape, Xf, XIf = X.shape, X.ravel(), XI.ravel()
        if z <= self.params.z0 + 1e-15:
            return {"I": np.zeros(shape),
                    "K": [np.zeros(shape, dtype=complex) for _ in range(self.order_J)]}
        zs, h = _ladder(self.params.z0, z, self.quad_dz)
        prov = _ModelProvider(self.b_model, zs, Xf, XIf)
        bsprov = _ModelProvider(self.bs_model, zs, Xf, XIf) if self.bs_model is not None else None
        zind = prov.z_independent and (bsprov is None or bsprov.z_independent)
        t = _damping_tables(prov, bsprov, zs, h, self.order_J, zind)
        return {"I": t["I"][-1].reshape(shape),
                "K": [t[f"K{j}"][-1].reshape(shape) for j in range(1, self.order_J + 1)]}

    def I_evaluator(self, z, x, xi):
        """Accumulated damping I(z, x, xi), vectorized over x and xi."""
        return self._pointwise(z, x, xi)["I"]

    @property
    def K_components(self):
        """Per-order correction evaluators K^(1..J) as callables (z, x, xi)."""
        return [
            (lambda z, x, xi, _j=j: self._pointwise(z, x, xi)["K"][_j - 1])
            for j in range(1, self.order_J + 1)
        ]

    def assembled(self, z, x, xi):
        """(1 + sum_j K^(j)) exp(-I) at (z, x, xi)."""
        t = self._pointwise(z, x, xi)
        tot = np.ones_like(t["I"], dtype=complex)
        for Kj in t["K"]:
            tot = tot + Kj
        return tot * np.exp(-t["I"])

    # -- grid tables -----------------------------------------------------

    def table_at(self, z: float) -> dict:
        for zt, tab in self.tables.items():
            if abs(zt - float(z)) <= 1e-9 * max(1.0, abs(z)):
                return tab
        raise QuadratureError(f"z={z!r} was not tabulated; available: {sorted(self.tables)}")

    def assembled_table(self, z: float) -> GridSymbol:
        if self.grid is None:
            raise ConfigError("parametrix was built without a grid")
        return GridSymbol(self.grid, float(z), self.table_at(z)["W"])

    def dz_table(self, z: float) -> GridSymbol:
        if self.grid is None:
            raise ConfigError("parametrix was built without a grid")
        return GridSymbol(self.grid, float(z), self.table_at(z)["dzW"])


def build_parametrix(
    prob: IVPProblem,
    J: int = 2,
    quad_dz: float = 1e-2,
    z_targets: Optional[list] = None,
) -> ParametrixSymbol:
    """Construct damping-parametrix grid tables for an A = 0 problem."""
    if prob.a_model is not None:
        raise ConfigError("build_parametrix requires A = 0; see conjugated_parametrix")
    params = prob.params
    ps = ParametrixSymbol(prob.b_model, prob.bs_model, params, J, quad_dz, prob.grid)
    if z_targets is None:
        z_targets = [params.Z]
    zs, h = _ladder(params.z0, params.Z, quad_dz)
    tidx = _targets_to_nodes(zs, z_targets)

    grid = prob.grid
    n = grid.n_points
    Xg, XIg = np.repeat(grid.x, n), np.tile(grid.freqs, n)

    acc: dict[int, dict] = {j: {} for j in tidx}
    for lo in range(0, n * n, _CHUNK):
        sl = slice(lo, min(lo + _CHUNK, n * n))
        prov = _ModelProvider(prob.b_model, zs, Xg[sl], XIg[sl])
        bsprov = _ModelProvider(prob.bs_model, zs, Xg[sl], XIg[sl]) if prob.bs_model else None
        zind = prov.z_independent and (bsprov is None or bsprov.z_independent)
        t = _damping_tables(prov, bsprov, zs, h, J, zind)
        for j in tidx:
            for name in _TABLE_KEYS:
                if name in t:
                    acc[j].setdefault(name, []).append(np.asarray(t[name][j]))

    for j in tidx:
        tab = {k: np.concatenate(v).reshape(n, n) for k, v in acc[j].items()}
        _finalize_tables(tab, J)
        ps.tables[float(zs[j])] = tab
        _record_ledger(ps.ledger, tab, float(zs[j]), J)
    return ps


def _record_ledger(ledger: CompositionLedger, tab: dict, z: float, J: int) -> None:
    if J >= 1:
        ledger.M_table[(1, 0)] = {"z": z, "table": tab["b"].copy()}
        ledger.M_table[(1, 1)] = {"z": z, "table": tab["r11"].copy()}
        # r^(1,0) = M^(1,0) + dz K^(0) - b = b - b
        ledger.r_table[(1, 0)] = {"z": z, "table": tab["b"] - tab["b"], "by_construction": True}
        ledger.r_table[(1, 1)] = {"z": z, "table": tab["r11"].copy()}
    if J >= 2:
        ledger.M_table[(1, 2)] = {"z": z, "table": tab["r12"].copy()}
        ledger.M_table[(2, 0)] = {"z": z, "table": tab["b"] * tab["K1"]}
        ledger.M_table[(2, 1)] = {"z": z, "table": tab["M21"].copy()}
        # r^(2,1) = r^(1,1) + dz K^(1), and dz K^(1) = -r^(1,1) from the build
        ledger.r_table[(2, 1)] = {"z": z, "table": tab["r11"] + (-tab["r11"]),
                                  "by_construction": True}
        ledger.r_table[(2, 2)] = {"z": z, "table": tab["r22"].copy()}


def parametrix_apply(ps: ParametrixSymbol, prob: IVPProblem, u0: WaveField, z: float) -> WaveField:
    """Op(W(z)) applied to the hyperbolically propagated initial data."""
    if ps.grid is None or ps.grid.n_points != u0.grid.n_points:
        raise GridMismatchError("parametrix grid does not match the field")
    if prob.a_model is not None:
        u1 = evolve(prob, u0, z, include_B=False).fields[-1]
    else:
        u1 = WaveField(u0.grid, z, u0.values.copy())
    return apply_op(ps.assembled_table(z), u1)


def parametrix_residual_norm(ps: ParametrixSymbol, prob: IVPProblem, u0: WaveField, z: float) -> float:
    """||P(Op(W) u0)||_2 at depth z, measured spectrally (A = 0 path)."""
    u = u0
    wu = apply_op(ps.assembled_table(z), u)
    r = apply_op(ps.dz_table(z), u).values + apply_op(prob.b_model, wu, z=z).values
    if prob.bs_model is not None:
        r = r + apply_op(prob.bs_model, wu, z=z).values
    w = 2.0 * np.pi / u0.grid.n_points
    return float(np.sqrt(w * np.sum(np.abs(r) ** 2)))


# ---------------------------------------------------------------------------
# A != 0: pullback along the flow
# ---------------------------------------------------------------------------

class ConjugatedParametrix:
    """Damping parametrix for A != 0 via pullback of b along the flow.

    ``apply(u0, z)`` realizes E0(z, z0) Op(W~(z)) u0, with W~ built from
    the transported symbol b(z, Phi_{z,z0}(x, xi)) at leading order (no
    transported subprincipal corrections).
    """

    def __init__(self, prob: IVPProblem, J: int, quad_dz: float, z_targets, flow_dz=1e-3):
        if prob.a_model is None:
            raise ConfigError("conjugated_parametrix requires an A term; use build_parametrix")
        if J < 0 or J > _MAX_J:
            raise ConfigError(f"J must be between 0 and {_MAX_J}")
        self.prob = prob
        self.order_J = J
        params = prob.params
        zs, h = _ladder(params.z0, params.Z, quad_dz)
        tidx = _targets_to_nodes(zs, z_targets)
        prov = _FlowProvider(prob.a_model, prob.b_model, prob.grid, zs, flow_dz)
        t = _damping_tables(prov, None, zs, h, J, z_independent=False)
        self.tables: dict[float, dict] = {}
        for j in tidx:
            tab = {name: np.asarray(t[name][j]) for name in _TABLE_KEYS if name in t}
            _finalize_tables(tab, J)
            self.tables[float(zs[j])] = tab

    def tilde_table(self, z: float) -> GridSymbol:
        for zt, tab in self.tables.items():
            if abs(zt - float(z)) <= 1e-9 * max(1.0, abs(z)):
                return GridSymbol(self.prob.grid, float(z), tab["W"])
        raise QuadratureError(f"z={z!r} was not tabulated")

    def apply(self, u0: WaveField, z: float) -> WaveField:
        v = apply_op(self.tilde_table(z), u0)
        v = WaveField(u0.grid, self.prob.params.z0, v.values)
        if abs(z - self.prob.params.z0) < 1e-15:
            return v
        return evolve(self.prob, v, z, include_B=False).fields[-1]


def conjugated_parametrix(
    prob: IVPProblem,
    J: int = 0,
    quad_dz: float = 1e-2,
    z_targets: Optional[list] = None,
    flow_dz: float = 1e-3,
) -> ConjugatedParametrix:
    if z_targets is None:
        z_targets = [prob.params.Z]
    return ConjugatedParametrix(prob, J, quad_dz, z_targets, flow_dz)


# ---------------------------------------------------------------------------
# generic composition terms (pointwise evaluators)
# ---------------------------------------------------------------------------

class DampingIntegralJet(JetExpr):
    """Jet-evaluable accumulated damping for straight rays: I = int_{z0}^z b.

    x / xi derivatives differentiate under the integral; z derivatives
    reduce to jets of b.
    """

    def __init__(self, b_model: SymbolModel, z0: float, quad_dz: float = 1e-2):
        self.b = b_model
        self.z0 = z0
        self.quad_dz = quad_dz

    def jet(self, z, x, xi, ax=0, bxi=0, jz=0):
        if jz > 0:
            return self.b.jet(z, x, xi, ax, bxi, jz - 1)
        shape = np.broadcast_shapes(np.shape(x), np.shape(xi))
        if z <= self.z0:
            return np.zeros(shape)
        if self.b.z_independent:
            return (z - self.z0) * np.broadcast_to(self.b.jet(z, x, xi, ax, bxi, 0), shape)
        zs, h = _ladder(self.z0, z, self.quad_dz)
        vals = np.stack([np.broadcast_to(self.b.jet(zp, x, xi, ax, bxi, 0), shape) for zp in zs])
        return cumulative_simpson_uniform(vals, h)[-1]


def _exp_factor_terms(m: int) -> dict:
    """e^{I} d_x^m e^{-I} as polynomial terms {tuple of x-orders: coeff} in I-jets."""
    terms = {(): 1.0}
    for _ in range(m):
        new: dict = {}
        for key, cf in terms.items():
            k2 = tuple(sorted(key + (1,)))
            new[k2] = new.get(k2, 0.0) - cf
            for i in range(len(key)):
                k3 = tuple(sorted(key[:i] + (key[i] + 1,) + key[i + 1:]))
                new[k3] = new.get(k3, 0.0) + cf
        terms = {k: c for k, c in new.items() if c != 0.0}
    return terms


def composition_terms_M(
    K,
    b_model: SymbolModel,
    bs_model: Optional[SymbolModel],
    k: int,
    z0: float = 0.0,
    quad_dz: float = 1e-2,
) -> JetExpr:
    """k-th composition term M^(k)(K) as a jet-evaluable symbol (k <= 3)."""
    if k < 0 or k > 3:
        raise ConfigError("composition terms are supported for k <= 3")
    if isinstance(K, SymbolModel):
        K = FuncJet(lambda z, x, xi, ax, bxi, jz, _m=K: _m.jet(z, x, xi, ax, bxi, jz))
    elif not isinstance(K, JetExpr):
        raise ConfigError("K must be a SymbolModel or a jet expression")
    I = DampingIntegralJet(b_model, z0, quad_dz)

    def b_deriv(model, m):
        return FuncJet(lambda z, x, xi, ax, bxi, jz, _mm=model, _m=m:
                       _mm.jet(z, x, xi, ax, bxi + _m, jz))

    pieces = []
    for m in range(k + 1):
        j = k - m
        if j > 1:
            continue
        model = b_model if j == 0 else bs_model
        if model is None:
            continue
        inner_terms = []
        for i in range(m + 1):
            Efac = None
            for key, cf in _exp_factor_terms(m - i).items():
                f: JetExpr = ConstJet(cf)
                for a_ord in key:
                    f = ProdJet(f, DerivJet(I, (a_ord, 0, 0)))
                Efac = f if Efac is None else SumJet([Efac, f])
            inner_terms.append(ProdJet(ConstJet(comb(m, i)),
                                       ProdJet(DerivJet(K, (i, 0, 0)), Efac)))
        inner = inner_terms[0] if len(inner_terms) == 1 else SumJet(inner_terms)
        coeff = (-1j) ** m / factorial(m)
        pieces.append(ProdJet(ConstJet(coeff), ProdJet(b_deriv(model, m), inner)))
    if not pieces:
        return ConstJet(0.0)
    return pieces[0] if len(pieces) == 1 else SumJet(pieces)
