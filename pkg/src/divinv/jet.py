"""Total derivatives and (partial, higher) Euler operators."""
from __future__ import annotations

from functools import lru_cache
from math import comb

import sympy as sp

from .expr import Signature, is_zero, normalize


def total_derivative(f, i: int, sig: Signature):
    """D_i f, with relation rules applied and the result normalized."""
    return _total_derivative(sp.sympify(f), i, sig)


@lru_cache(maxsize=100_000)
def _total_derivative(f, i, sig):
    out = sp.diff(f, sig.x[i])
    for s in sig.jet_symbols(f):
        c = sig.coord(s)
        out += sig.sym(c.shifted(i)) * sp.diff(f, s)
    return normalize(sig.apply_relations(out))


def total_derivative_multi(f, J, sig: Signature):
    """D_J f = D_1^{j1} ... D_p^{jp} f."""
    for i, k in enumerate(J):
        for _ in range(k):
            f = total_derivative(f, i, sig)
    return f


def _minus_D(f, J, sig):
    sign = -1 if sum(J) % 2 else 1
    return sign * total_derivative_multi(f, J, sig)


def partial_euler(f, dep: str, I, x: int, k: int, sig: Signature, shadow: bool = False):
    """E^x_{u_{I,k}}(f) = sum_j (-D_x)^j  d f / d u_{I,j+k}."""
    f = normalize(f)
    I = tuple(I)
    if I[x] != 0:
        raise ValueError("family index must have zero order in the x slot")
    out = sp.Integer(0)
    for c in sig.jets(f):
        if c.dep != dep or c.shadow != shadow:
            continue
        if any(a != b for s, (a, b) in enumerate(zip(c.index, I)) if s != x):
            continue
        j = c.index[x] - k
        if j < 0:
            continue
        g = sp.diff(f, sig.sym(c))
        for _ in range(j):
            g = -total_derivative(g, x, sig)
        out += g
    return normalize(out)


def euler_direct(f, dep: str, sig: Signature, shadow: bool = False):
    """E_u(f) from the defining sum; kept as an oracle for :func:`euler`."""
    f = normalize(f)
    out = sp.Integer(0)
    for c in sig.jets(f):
        if c.dep == dep and c.shadow == shadow:
            out += _minus_D(sp.diff(f, sig.sym(c)), c.index, sig)
    return normalize(out)


def euler(f, dep: str, sig: Signature, x: int = 0, shadow: bool = False):
    """E_u(f) = sum_I (-D)_I E^x_{u_I}(f)."""
    f = normalize(f)
    fams = set()
    for c in sig.jets(f):
        if c.dep == dep and c.shadow == shadow:
            idx = list(c.index)
            idx[x] = 0
            fams.add(tuple(idx))
    out = sp.Integer(0)
    for I in sorted(fams):
        out += _minus_D(partial_euler(f, dep, I, x, 0, sig, shadow), I, sig)
    return normalize(out)


def is_divergence(C, sig: Signature) -> bool:
    """E_u(C) = 0 for every dependent variable present (shadows included)."""
    C = normalize(C)
    deps = {(c.dep, c.shadow) for c in sig.jets(C)}
    return all(is_zero(euler(C, dep, sig, shadow=sh)) for dep, sh in sorted(deps))


def higher_euler_1d(f, dep: str, i: int, x: int, sig: Signature, I=None):
    """sum_{k>=i} C(k,i) (-D_x)^{k-i} df/d(D_x^k u_I), other slots fixed by I."""
    f = normalize(f)
    I = tuple(I) if I is not None else (0,) * sig.p
    out = sp.Integer(0)
    for c in sig.jets(f):
        if c.dep != dep or c.shadow:
            continue
        if any(a != b for s, (a, b) in enumerate(zip(c.index, I)) if s != x):
            continue
        k = c.index[x]
        if k < i:
            continue
        g = comb(k, i) * sp.diff(f, sig.sym(c))
        for _ in range(k - i):
            g = -total_derivative(g, x, sig)
        out += g
    return normalize(out)


def divergence(components, sig: Signature):
    return normalize(sp.Add(*[total_derivative(F, i, sig) for i, F in enumerate(components)]))


def family_members(f, dep, I, x, sig: Signature, shadow=False):
    out = []
    for c in sig.jets(f):
        if c.dep == dep and c.shadow == shadow and all(
                a == b for s, (a, b) in enumerate(zip(c.index, I)) if s != x):
            out.append(c)
    return sorted(out, key=lambda c: c.index[x])
