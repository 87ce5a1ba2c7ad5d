"""Partial scalings, the projection pi, and shadow variables."""
from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp

from .errors import UnsupportedScaling
from .expr import LAMBDA, JetCoordinate, Signature, normalize, terms


@dataclass(frozen=True)
class Family:
    """The family [u^alpha_I]_x = {u^alpha_{I,j} : j >= 0}."""

    x: int
    dep: str
    I: tuple
    shadow: bool = False
    lam: sp.Symbol = field(default=LAMBDA, compare=False)

    def __post_init__(self):
        if self.I[self.x] != 0:
            raise ValueError("family index must be zero in the x slot")

    def contains(self, c: JetCoordinate) -> bool:
        return (c.dep == self.dep and c.shadow == self.shadow
                and all(a == b for s, (a, b) in enumerate(zip(c.index, self.I)) if s != self.x))

    def member(self, k: int) -> JetCoordinate:
        idx = list(self.I)
        idx[self.x] = k
        return JetCoordinate(self.dep, tuple(idx), self.shadow)

    @property
    def base(self) -> JetCoordinate:
        return self.member(0)

    @property
    def level(self) -> int:
        return sum(self.I)

    def shadowed(self) -> "Family":
        return Family(self.x, self.dep, self.I, True, self.lam)

    def members_in(self, f, sig: Signature):
        return sorted((c for c in sig.jets(f) if self.contains(c)), key=lambda c: c.index[self.x])

    def depends(self, f, sig: Signature) -> bool:
        return any(self.contains(c) for c in sig.jets(f))


ScalingSpec = Family


@dataclass(frozen=True)
class ScalingClass:
    kind: str  # "good" | "poor" | "irrelevant"
    zero_degree_terms: tuple


def partial_scale(f, s: Family, sig: Signature):
    """sigma(f; lambda), fully expanded so lambda dependence is explicit."""
    f = normalize(f)
    lam = s.lam
    reps = {sig.sym(c): lam * sig.sym(c) for c in s.members_in(f, sig)}
    g = f.xreplace(reps)
    return normalize(_pull_lambda(g, lam))


def _pull_lambda(e, lam):
    # factor lambda out of sums under non-integer powers so it splits off
    if e.is_Atom:
        return e
    args = [_pull_lambda(a, lam) for a in e.args]
    if e.is_Pow and args[0].is_Add and args[0].has(lam):
        return sp.factor_terms(args[0]) ** args[1]
    if isinstance(e, sp.log) and args[0].has(lam):
        return sp.log(sp.factor_terms(args[0]))
    return e.func(*args)


def _lambda_shape(t, lam):
    """(r, s) with t = lambda^r ln(lambda)^s * (lambda-free), or None."""
    r, s = sp.Integer(0), 0
    rest = []
    for fct in sp.Mul.make_args(t):
        b, ex = (fct.base, fct.exp) if fct.is_Pow else (fct, sp.Integer(1))
        if b == lam:
            r += ex
        elif b == sp.log(lam) and ex.is_Integer and ex > 0:
            s += int(ex)
        elif fct.has(lam):
            return None
        else:
            rest.append(fct)
    return r, s


def project(f, s: Family, sig: Signature):
    """pi(f): keep the terms of sigma(f) carrying a nonzero power of lambda."""
    sigma = partial_scale(f, s, sig)
    keep = []
    for t in terms(sigma):
        shape = _lambda_shape(t, s.lam)
        if shape is None:
            # lambda inside exp/sin/... : it survives d/dlambda, so keep it
            keep.append(t)
            continue
        r, k = shape
        if k == 0 and r != 0:
            keep.append(t)
    return normalize(sp.Add(*keep).xreplace({s.lam: sp.Integer(1)}))


def classify_scaling(f, s: Family, sig: Signature) -> ScalingClass:
    f = normalize(f)
    if not s.depends(f, sig):
        return ScalingClass("irrelevant", ())
    zero = []
    for t in terms(f):
        if not s.depends(t, sig):
            continue
        if s.depends(normalize(t - project(t, s, sig)), sig):
            zero.append(t)
    return ScalingClass("poor" if zero else "good", tuple(zero))


def shadow_shift(f, s: Family, ts, sig: Signature):
    """Replace u_{I,j} by u_{I,j} + U_{I,j} inside the listed terms only."""
    f = normalize(f)
    present = set(terms(f))
    out = f
    for t in ts:
        t = normalize(t)
        if t not in present:
            raise ValueError(f"term {t} not found in expression")
        reps = {sig.sym(c): sig.sym(c) + sig.sym(JetCoordinate(c.dep, c.index, True))
                for c in s.members_in(t, sig)}
        out = out - t + t.xreplace(reps)
    return normalize(out)


def zero_shadows(f, sig: Signature):
    reps = {sig.sym(c): sp.Integer(0) for c in sig.jets(f) if c.shadow}
    return normalize(sp.sympify(f).xreplace(reps)) if reps else normalize(f)


def check_supported(f, s: Family, sig: Signature):
    """Raise if lambda ends up somewhere the termwise rule cannot classify."""
    for t in terms(partial_scale(f, s, sig)):
        for d in sp.sympify(t).atoms(sp.Derivative, sp.Subs):
            if d.has(s.lam):
                raise UnsupportedScaling(f"lambda inside {d}")
