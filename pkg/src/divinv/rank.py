"""Rankings, leading parts, integration by parts and the ranking heuristic."""
from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp
from sympy.core.function import AppliedUndef

from .errors import NoJetDependence
from .expr import JetCoordinate, Signature, normalize, terms
from .integrate import antiderivative
from .jet import total_derivative


@dataclass(frozen=True)
class Ranking:
    """Derivative-dominant ranking, or x-dominant when ``x`` is set.

    ``indep_order`` lists slots from lowest to highest, ``dep_order`` lists
    dependent-variable names from lowest to highest.  A shadow coordinate sits
    just above the coordinate it shadows.
    """

    indep_order: tuple
    dep_order: tuple
    x: int | None = None

    def key(self, c: JetCoordinate):
        dd = tuple(c.index[s] for s in reversed(self.indep_order))
        dd += (self.dep_order.index(c.dep), int(c.shadow))
        return (c.index[self.x],) + dd if self.x is not None else dd

    def x_dominant(self, x: int) -> "Ranking":
        return Ranking(self.indep_order, self.dep_order, x)

    def derivative_dominant(self) -> "Ranking":
        return Ranking(self.indep_order, self.dep_order, None)

    def compare(self, a: JetCoordinate, b: JetCoordinate) -> int:
        ka, kb = self.key(a), self.key(b)
        return (ka > kb) - (ka < kb)

    def rank_of(self, f, sig: Signature):
        """Key of the highest-ranked jet in f, or None for jet-free f."""
        js = sig.jets(f)
        return max((self.key(c) for c in js), default=None)

    def describe(self, sig: Signature) -> str:
        xs = " < ".join(sig.indep_names[s] for s in self.indep_order)
        us = " < ".join(self.dep_order)
        return f"{xs}; {us}"

    @classmethod
    def default(cls, sig: Signature) -> "Ranking":
        return cls(tuple(range(sig.p)), tuple(sig.dep_names))


def compare(r: Ranking, a: JetCoordinate, b: JetCoordinate) -> int:
    return r.compare(a, b)


def leading_part(f, r: Ranking, sig: Signature):
    f = normalize(f)
    js = sig.jets(f)
    if not js:
        raise NoJetDependence(f"{f} has no jet coordinates")
    top = max(js, key=r.key)
    s = sig.sym(top)
    return normalize(sp.Add(*[t for t in terms(f) if t.has(s)])), top


@dataclass
class SplitResult:
    F: sp.Expr
    R: sp.Expr


def integrate_by_parts(P, x: int, r: Ranking, sig: Signature, family=None) -> SplitResult:
    """Split P = D_x F + R with R of lowest possible x-order.

    With ``family`` set, only members of that family are integrated; other
    jets are treated as coefficients.
    """
    rx = r.x_dominant(x)
    P = normalize(P)
    F = sp.Integer(0)
    R = sp.Integer(0)
    for _ in range(10_000):
        if P == 0:
            break
        js = sig.jets(P)
        if family is not None:
            js = {c for c in js if family.contains(c)}
        if not js:
            R += P
            break
        U = max(js, key=rx.key)
        k = U.index[x]
        if k == 0:
            R += P
            break
        Us = sig.sym(U)
        Uprev = U.shifted(x, -1)
        top = rx.key(Uprev)
        g = sp.Add(*[t for t in terms(P) if t.has(Us)])
        h = sp.Integer(0)
        for t in terms(g):
            gamma = t / Us
            if gamma.has(Us):
                continue
            gj = sig.jets(gamma)
            if family is not None:
                gj = {c for c in gj if family.contains(c)}
            if all(rx.key(c) <= top for c in gj):
                h += gamma
        if h == 0:
            R += g
            P = normalize(P - g)
            continue
        H = antiderivative(h, sig.sym(Uprev))
        F += H
        R += g - h * Us
        P = normalize(P - g + h * Us - total_derivative(H, x, sig))
    else:
        raise RuntimeError("integration by parts did not terminate")
    return SplitResult(normalize(F), normalize(R))


# ---------------------------------------------------------------------------
# heuristic

def _arb_args(e):
    out = set()
    for f in sp.sympify(e).atoms(AppliedUndef):
        out |= f.free_symbols
    for d in sp.sympify(e).atoms(sp.Derivative, sp.Subs):
        out |= d.free_symbols
    return out


def _explicit_complexity(t, xs, sig):
    """Per-slot polynomial degree of the x-dependent, non-arbitrary coefficient."""
    coef = sp.Mul(*[f for f in sp.Mul.make_args(t)
                    if not sig.depends_on_jets(f)
                    and not f.atoms(AppliedUndef) and not f.atoms(sp.Derivative, sp.Subs)])
    out = {}
    for s, xv in enumerate(xs):
        if not coef.has(xv):
            continue
        if coef.is_polynomial(xv):
            out[s] = sp.degree(coef, xv)
        else:
            out[s] = float("inf")
    return out


def _nonrational_args(t, sig):
    """Jets appearing inside ln/exp/sin/cos or under non-integer powers."""
    out = set()
    for f in sp.sympify(t).atoms(sp.log, sp.exp, sp.sin, sp.cos):
        out |= sig.jets(f.args[0])
    for p in sp.sympify(t).atoms(sp.Pow):
        if not p.exp.is_Integer:
            out |= sig.jets(p.base)
    return out


def heuristic_rank(C, sig: Signature, active=None):
    """(indep_order, dep_order, tie_report) from the ranking criteria.

    Slots outside ``active`` are appended above the active ones, in
    declaration order.
    """
    C = normalize(C)
    active = list(range(sig.p)) if active is None else list(active)
    ts = terms(C)
    xs = sig.x
    ties = []

    def deg_in_jets(t):
        syms = sig.jet_symbols(t)
        if not syms:
            return 0
        if not t.is_polynomial(*syms):
            return 2
        return sp.Poly(t, *syms).total_degree()

    nonlinear = [t for t in ts if deg_in_jets(t) >= 2]
    arb_vars = set()
    for t in nonlinear:
        arb_vars |= _arb_args(t)
    complexity = {s: 0 for s in active}
    for t in ts:
        for s, d in _explicit_complexity(t, xs, sig).items():
            if s in complexity:
                complexity[s] = max(complexity[s], d)

    def feats(s, sel):
        """Criteria 3-5 restricted to jets chosen by ``sel``."""
        in_fn = False
        top = 0
        count = 0
        for t in ts:
            nr = _nonrational_args(t, sig)
            for c in sig.jets(t):
                if not sel(c):
                    continue
                count += 1
                top = max(top, c.index[s])
                if c in nr:
                    in_fn = True
        return (0 if in_fn else 1, -top, -count)

    def unmixed(s):
        return lambda c: c.index[s] > 0 and all(k == 0 for j, k in enumerate(c.index) if j != s)

    def min_mixed(s):
        mixed = [c for t in ts for c in sig.jets(t)
                 if c.index[s] > 0 and any(k for j, k in enumerate(c.index) if j != s)]
        if not mixed:
            return lambda c: False
        m = min(sum(k for j, k in enumerate(c.index) if j != s) for c in mixed)
        return lambda c: (c.index[s] > 0 and
                          sum(k for j, k in enumerate(c.index) if j != s) == m and m > 0)

    keys = {}
    for s in active:
        keys[s] = (int(xs[s] in arb_vars), complexity[s], feats(s, unmixed(s)),
                   feats(s, min_mixed(s)))
    order = sorted(active, key=lambda s: (keys[s], active.index(s)))
    for a, b in zip(order, order[1:]):
        if keys[a] == keys[b]:
            ties.append(f"{sig.indep_names[a]} ~ {sig.indep_names[b]} (declaration order)")
    order += [s for s in range(sig.p) if s not in active]

    # dependent variables
    r0 = Ranking(tuple(order), tuple(sig.dep_names))
    present = [d for d in sig.dep_names if any(c.dep == d and not c.shadow for c in sig.jets(C))]
    dkeys = {}
    for d in sig.dep_names:
        syms = [sig.sym(c) for c in sig.jets(C) if c.dep == d and not c.shadow]
        if not syms:
            dkeys[d] = (2, (), 0)
            continue
        lin = all(t.is_polynomial(*syms) and sp.Poly(t, *syms).total_degree() <= 1
                  for t in ts if any(t.has(s) for s in syms))
        low = min((sig.coord(s) for s in syms), key=lambda c: r0.key(c))
        lowkey = tuple(low.index[s] for s in reversed(order))
        occ = sum(1 for t in ts if t.has(sig.sym(low)))
        dkeys[d] = (0 if lin else 1, lowkey, -occ)
    dep_order = sorted(sig.dep_names, key=lambda d: (dkeys[d], sig.dep_names.index(d)))
    for a, b in zip(dep_order, dep_order[1:]):
        if dkeys[a] == dkeys[b] and a in present and b in present:
            ties.append(f"{a} ~ {b} (declaration order)")
    return tuple(order), tuple(dep_order), ties
