"""Derivative (jet) machinery for symbol families.

A "jet" here is a mixed partial derivative d_x^ax d_xi^bxi d_z^jz of a
symbol f(z, x, xi), evaluated vectorized over numpy arrays of x and xi
at a scalar depth z.  Closed-form ladders are provided for the shipped
analytic building blocks; everything else can fall back to nested
central differences with one Richardson level.
"""
from __future__ import annotations

from functools import lru_cache
from math import comb, factorial

import numpy as np

Order = tuple[int, int, int]


# ---------------------------------------------------------------------------
# closed-form derivative ladders for the analytic building blocks
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _exp_inv_poly(j: int) -> tuple[float, ...]:
    """Coefficients (low->high) of P_j with h^(j)(y) = P_j(1/y) exp(-1/y).

    Recursion: P_0 = 1, P_{j+1}(u) = u^2 (P_j(u) - P_j'(u)).
    """
    if j == 0:
        return (1.0,)
    p = np.asarray(_exp_inv_poly(j - 1))
    dp = np.arange(1, len(p)) * p[1:] if len(p) > 1 else np.zeros(1)
    q = np.zeros(len(p))
    q[: len(p)] += p
    q[: len(dp)] -= dp
    return tuple(np.concatenate([[0.0, 0.0], q]))


def exp_inv_h(y, j: int = 0):
    """j-th derivative of h(y) = exp(-1/y) for y > 0, h = 0 for y <= 0."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    pos = y > 0
    if np.any(pos):
        u = 1.0 / y[pos]
        out[pos] = np.polynomial.polynomial.polyval(u, _exp_inv_poly(j)) * np.exp(-u)
    return out


def exp_inv_log_ratio(y, j: int, frac: float):
    """log of |h^(j)(y)| / h(y)^(1-frac) for h = exp(-1/y), evaluated stably.

    Equals log|P_j(1/y)| - frac/y; -inf where P_j(1/y) = 0 or y <= 0.
    """
    y = np.asarray(y, dtype=float)
    out = np.full(y.shape, -np.inf)
    pos = y > 0
    u = 1.0 / y[pos]
    pj = np.abs(np.polynomial.polynomial.polyval(u, _exp_inv_poly(j)))
    with np.errstate(divide="ignore"):
        out[pos] = np.log(pj) - frac * u
    return out


@lru_cache(maxsize=256)
def _iso_power_poly(p: float, b: int) -> tuple[float, ...]:
    """Coefficients of Q_b with d^b (1+xi^2)^(p/2) = Q_b(xi) (1+xi^2)^(p/2-b)."""
    if b == 0:
        return (1.0,)
    q = np.asarray(_iso_power_poly(p, b - 1))
    dq = np.arange(1, len(q)) * q[1:] if len(q) > 1 else np.zeros(1)
    out = np.zeros(len(q) + 1)
    out[: len(dq)] += dq           # q'
    out[2: 2 + len(dq)] += dq      # xi^2 q'
    out[1: 1 + len(q)] += (p - 2 * (b - 1)) * q
    return tuple(out)


def iso_power(xi, p: float, b: int = 0):
    """b-th xi-derivative of (1 + xi^2)^(p/2)."""
    xi = np.asarray(xi, dtype=float)
    q = np.polynomial.polynomial.polyval(xi, np.asarray(_iso_power_poly(p, b)))
    return q * (1.0 + xi ** 2) ** (p / 2.0 - b)


# ---------------------------------------------------------------------------
# finite-difference fallback: nested central differences + one Richardson level
# ---------------------------------------------------------------------------

def _fd_nested(value, z, x, xi, ax, bxi, jz, hx, hxi, hz):
    if ax > 0:
        hi = _fd_nested(value, z, x + hx, xi, ax - 1, bxi, jz, hx, hxi, hz)
        lo = _fd_nested(value, z, x - hx, xi, ax - 1, bxi, jz, hx, hxi, hz)
        return (hi - lo) / (2.0 * hx)
    if bxi > 0:
        hi = _fd_nested(value, z, x, xi + hxi, ax, bxi - 1, jz, hx, hxi, hz)
        lo = _fd_nested(value, z, x, xi - hxi, ax, bxi - 1, jz, hx, hxi, hz)
        return (hi - lo) / (2.0 * hxi)
    if jz > 0:
        hi = _fd_nested(value, z + hz, x, xi, ax, bxi, jz - 1, hx, hxi, hz)
        lo = _fd_nested(value, z - hz, x, xi, ax, bxi, jz - 1, hx, hxi, hz)
        return (hi - lo) / (2.0 * hz)
    return value(z, x, xi)


def fd_jet(value, z, x, xi, ax, bxi, jz, base_step: float = 1e-4):
    """Mixed partial by nested central differences, one Richardson level.

    Steps: base_step in x and z, base_step * (1 + |xi|) in xi.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if ax + bxi + jz == 0:
        return value(z, x, xi)
    hxi = base_step * (1.0 + np.abs(xi))
    coarse = _fd_nested(value, z, x, xi, ax, bxi, jz, base_step, hxi, base_step)
    fine = _fd_nested(value, z, x, xi, ax, bxi, jz, base_step / 2, hxi / 2, base_step / 2)
    return (4.0 * fine - coarse) / 3.0


# ---------------------------------------------------------------------------
# jet-expression combinators
# ---------------------------------------------------------------------------

class JetExpr:
    """A symbol with mixed-partial evaluation, built from combinators."""

    def jet(self, z, x, xi, ax=0, bxi=0, jz=0):
        raise NotImplementedError

    def value(self, z, x, xi):
        return self.jet(z, x, xi, 0, 0, 0)

    def __add__(self, other):
        return SumJet([self, _as_expr(other)])

    def __mul__(self, other):
        return ProdJet(self, _as_expr(other))

    def __rmul__(self, other):
        return ProdJet(_as_expr(other), self)


def _as_expr(obj):
    if isinstance(obj, JetExpr):
        return obj
    if np.isscalar(obj):
        return ConstJet(obj)
    raise TypeError(f"cannot treat {obj!r} as a jet expression")


class ConstJet(JetExpr):
    def __init__(self, c):
        self.c = c

    def jet(self, z, x, xi, ax=0, bxi=0, jz=0):
        shape = np.broadcast_shapes(np.shape(x), np.shape(xi))
        if ax or bxi or jz:
            return np.zeros(shape)
        return np.broadcast_to(np.asarray(self.c), shape).copy()


class FuncJet(JetExpr):
    """Leaf defined by an explicit jet callable (z, x, xi, ax, bxi, jz)."""

    def __init__(self, fn):
        self.fn = fn

    def jet(self, z, x, xi, ax=0, bxi=0, jz=0):
        return self.fn(z, x, xi, ax, bxi, jz)


class SumJet(JetExpr):
    def __init__(self, terms, coeffs=None):
        self.terms = [_as_expr(t) for t in terms]
        self.coeffs = coeffs if coeffs is not None else [1.0] * len(self.terms)

    def jet(self, z, x, xi, ax=0, bxi=0, jz=0):
        tot = None
        for c, t in zip(self.coeffs, self.terms):
            v = c * t.jet(z, x, xi, ax, bxi, jz)
            tot = v if tot is None else tot + v
        return tot


class ProdJet(JetExpr):
    def __init__(self, f, g):
        self.f = _as_expr(f)
        self.g = _as_expr(g)

    def jet(self, z, x, xi, ax=0, bxi=0, jz=0):
        tot = None
        for i in range(ax + 1):
            for j in range(bxi + 1):
                for l in range(jz + 1):
                    c = comb(ax, i) * comb(bxi, j) * comb(jz, l)
                    v = c * self.f.jet(z, x, xi, i, j, l) \
                        * self.g.jet(z, x, xi, ax - i, bxi - j, jz - l)
                    tot = v if tot is None else tot + v
        return tot


class DerivJet(JetExpr):
    """Shift a jet expression by a fixed derivative multi-order."""

    def __init__(self, f, shift: Order):
        self.f = _as_expr(f)
        self.shift = shift

    def jet(self, z, x, xi, ax=0, bxi=0, jz=0):
        s = self.shift
        return self.f.jet(z, x, xi, ax + s[0], bxi + s[1], jz + s[2])


class ConjJet(JetExpr):
    def __init__(self, f):
        self.f = _as_expr(f)

    def jet(self, z, x, xi, ax=0, bxi=0, jz=0):
        return np.conj(self.f.jet(z, x, xi, ax, bxi, jz))


class RealJet(JetExpr):
    def __init__(self, f):
        self.f = _as_expr(f)

    def jet(self, z, x, xi, ax=0, bxi=0, jz=0):
        return np.real(self.f.jet(z, x, xi, ax, bxi, jz))


class ImagJet(JetExpr):
    def __init__(self, f):
        self.f = _as_expr(f)

    def jet(self, z, x, xi, ax=0, bxi=0, jz=0):
        return np.imag(self.f.jet(z, x, xi, ax, bxi, jz))


# Faa di Bruno over the three variables, as an expansion
#   d^(ax,bxi,jz) phi(f) = sum_terms coeff * phi^(m)(f) * prod_o f_jet(o)
# keyed by (m, sorted tuple of orders).  The expansion is independent of
# phi and f, so it is cached per derivative multi-order.

@lru_cache(maxsize=512)
def _chain_expansion(ax: int, bxi: int, jz: int):
    terms = {(0, ()): 1.0}

    def diff(terms, v):
        out = {}
        for (m, key), cf in terms.items():
            k2 = (m + 1, tuple(sorted(key + (v,))))
            out[k2] = out.get(k2, 0.0) + cf
            for i in range(len(key)):
                o = key[i]
                o2 = (o[0] + v[0], o[1] + v[1], o[2] + v[2])
                k3 = (m, tuple(sorted(key[:i] + (o2,) + key[i + 1:])))
                out[k3] = out.get(k3, 0.0) + cf
        return {k: c for k, c in out.items() if c != 0.0}

    for _ in range(ax):
        terms = diff(terms, (1, 0, 0))
    for _ in range(bxi):
        terms = diff(terms, (0, 1, 0))
    for _ in range(jz):
        terms = diff(terms, (0, 0, 1))
    return tuple((m, key, cf) for (m, key), cf in terms.items())


class ChainJet(JetExpr):
    """phi composed with an inner jet expression.

    `phi_derivs(y, m)` must return the m-th derivative of the scalar
    function phi evaluated vectorized on y.
    """

    def __init__(self, phi_derivs, inner):
        self.phi = phi_derivs
        self.inner = _as_expr(inner)

    def jet(self, z, x, xi, ax=0, bxi=0, jz=0):
        f0 = self.inner.jet(z, x, xi, 0, 0, 0)
        tot = None
        cache = {}
        for m, key, cf in _chain_expansion(ax, bxi, jz):
            v = cf * self.phi(f0, m)
            for o in key:
                if o not in cache:
                    cache[o] = self.inner.jet(z, x, xi, *o)
                v = v * cache[o]
            tot = v if tot is None else tot + v
        return tot


def exp_neg_derivs(y, m: int):
    """m-th derivative of y -> exp(-y)."""
    return (-1.0) ** m * np.exp(-np.asarray(y, dtype=float))


def shifted_power_derivs(p: float):
    """Derivative ladder of y -> (1 + y)^p."""

    def phi(y, m):
        c = 1.0
        for i in range(m):
            c *= p - i
        return c * (1.0 + np.asarray(y, dtype=float)) ** (p - m)

    return phi
