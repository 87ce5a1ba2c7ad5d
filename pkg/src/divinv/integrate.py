"""Antiderivatives and inversion of D_x.

``antiderivative`` tries a small auditable rule table first and only then
falls back to sympy's integrator, whose answers are accepted only if they
stay inside the expression grammar and differentiate back to the integrand.
"""
from __future__ import annotations

from math import comb

import sympy as sp
from sympy.core.function import AppliedUndef

from .errors import NonPolynomial, NotInImage, NotInKernel, NotIntegrable
from .expr import LAMBDA, JetCoordinate, Signature, is_zero, normalize, terms
from .jet import partial_euler, total_derivative, higher_euler_1d
from .scale import Family, partial_scale

_ALLOWED = (sp.log, sp.exp, sp.sin, sp.cos)


def _split(t, v):
    """t = A*B with A free of v."""
    a, b = [], []
    for f in sp.Mul.make_args(t):
        (b if f.has(v) else a).append(f)
    return sp.Mul(*a), sp.Mul(*b)


def _free(e, v):
    return not sp.sympify(e).has(v)


def _ratio(B, d, v):
    q = normalize(B / d)
    if _free(q, v):
        return q
    q = sp.cancel(sp.together(q))
    return q if _free(q, v) else None


def _inners(B, v):
    """Candidate (outer antiderivative, factor, inner derivative) triples."""
    out = []
    for f in sp.Mul.make_args(B):
        b, ex = (f.base, f.exp) if f.is_Pow else (f, sp.Integer(1))
        if isinstance(b, sp.exp):
            w = b.args[0]
            out.append((sp.exp(ex * w) / ex, f, sp.diff(w, v)))
        elif isinstance(b, sp.sin) and ex == 1:
            out.append((-sp.cos(b.args[0]), f, sp.diff(b.args[0], v)))
        elif isinstance(b, sp.cos) and ex == 1:
            out.append((sp.sin(b.args[0]), f, sp.diff(b.args[0], v)))
        elif isinstance(b, sp.log) and ex.is_Integer and ex > 0:
            w = b.args[0]
            out.append((b ** (ex + 1) / (ex + 1), f, sp.diff(w, v) / w))
        elif b.has(v) and not b.is_Symbol and b.is_Add:
            if ex == -1:
                out.append((sp.log(b), f, sp.diff(b, v)))
            else:
                out.append((b ** (ex + 1) / (ex + 1), f, sp.diff(b, v)))
    return out


def _term_rule(t, v, depth=0):
    A, B = _split(t, v)
    if B == 1:
        return t * v
    if B == v:
        return A * v ** 2 / 2
    if B.is_Pow and B.base == v:
        n = B.exp
        return A * (sp.log(v) if n == -1 else v ** (n + 1) / (n + 1))
    # derivative of an arbitrary function with respect to v
    if isinstance(B, sp.Derivative) and isinstance(B.expr, AppliedUndef):
        counts = dict(B.variable_count)
        if counts.get(v, 0) >= 1:
            counts[v] -= 1
            rest = [(s, k) for s, k in counts.items() if k]
            return A * (sp.Derivative(B.expr, *rest) if rest else B.expr)
    # derivative-divides, covers exp/sin/cos/log and powers of polynomials
    for h, fct, dw in _inners(B, v):
        if dw == 0:
            continue
        q = _ratio(B, fct * dw, v)
        if q is not None:
            return A * q * h
    # polynomial times exp/sin/cos of a linear argument: integrate by parts
    if depth < 8:
        for f in sp.Mul.make_args(B):
            base, n = (f.base, f.exp) if f.is_Pow else (f, sp.Integer(1))
            if base == v and n.is_Integer and n > 0:
                other = B / f
                if isinstance(other, (sp.exp, sp.sin, sp.cos)):
                    w = other.args[0]
                    a = sp.diff(w, v)
                    if a != 0 and _free(a, v):
                        inner = _term_rule(other, v, depth + 1)
                        if inner is None:
                            return None
                        rest = _term_rule(normalize(n * v ** (n - 1) * inner), v, depth + 1)
                        if rest is None:
                            return None
                        return A * (v ** n * inner - rest)
    return None


def _grammar_ok(e):
    if e.has(sp.Integral, sp.Piecewise, sp.I):
        return False
    for f in e.atoms(sp.Function):
        if not isinstance(f, _ALLOWED) and not isinstance(f, AppliedUndef):
            return False
    return True


def _fallback(g, v):
    """Partial fractions, then sympy's integrators; result is re-checked."""
    if g.is_rational_function(v):
        try:
            parts = sp.apart(sp.together(g), v)
        except (sp.PolynomialError, NotImplementedError):
            parts = None
        if parts is not None:
            out = []
            for t in sp.Add.make_args(sp.expand(parts)):
                r = _term_rule(normalize(t), v)
                if r is None:
                    out = None
                    break
                out.append(r)
            if out is not None:
                return sp.Add(*out)
    from sympy.integrals.manualintegrate import manualintegrate
    for integrator in (manualintegrate, sp.integrate):
        try:
            r = integrator(g, v)
        except Exception:  # sympy raises a zoo of exception types here
            continue
        if r is not None and _grammar_ok(r):
            return r
    return None


def antiderivative(f, v):
    """Minimal-term F with dF/dv = f; v-free summands are dropped."""
    f = normalize(f)
    if f == 0:
        return sp.Integer(0)
    out, failed = [], []
    for t in terms(f):
        r = _term_rule(t, v) if t.has(v) else t * v
        if r is None:
            failed.append(t)
        else:
            out.append(r)
    if failed:
        r = _fallback(sp.Add(*failed), v)
        if r is None:
            raise NotIntegrable(sp.Add(*failed), v)
        out.append(r)
    F = normalize(sp.Add(*out))
    F = normalize(sp.Add(*[t for t in terms(F) if t.has(v)]))
    if not is_zero(sp.diff(F, v) - f):
        raise NotIntegrable(f, v, f"antiderivative check failed for {f} d{v}")
    return F


# ---------------------------------------------------------------------------

def families_wrt(f, x: int, sig: Signature):
    """Families [u_I]_x present in f, keyed by (dep, I, shadow) -> max order."""
    out = {}
    for c in sig.jets(f):
        idx = list(c.index)
        k = idx[x]
        idx[x] = 0
        key = Family(x, c.dep, tuple(idx), c.shadow)
        out[key] = max(out.get(key, 0), k)
    return out


def _default_key(sig):
    def key(fam: Family):
        return (tuple(reversed(fam.I)), sig.dep_names.index(fam.dep), fam.shadow)
    return key


def invert_dx_line(P, x: int, sig: Signature, family_key=None):
    """F with D_x F = P via the indefinite line integral over jet space."""
    P = normalize(P)
    if P == 0:
        return sp.Integer(0)
    fams = families_wrt(P, x, sig)
    for fam in fams:
        if not is_zero(partial_euler(P, fam.dep, fam.I, x, 0, sig, fam.shadow)):
            raise NotInImage(f"P is not a total x-derivative (family {fam.dep}{fam.I})")
    key = family_key or _default_key(sig)
    order = sorted(fams, key=key)
    legs = []
    a_x = P
    for fam in order:
        for k in range(1, fams[fam] + 1):
            a_x -= sig.sym(fam.member(k)) * partial_euler(P, fam.dep, fam.I, x, k, sig, fam.shadow)
    legs.append((sig.x[x], normalize(a_x)))
    for fam in order:
        for k in range(0, fams[fam]):
            legs.append((sig.sym(fam.member(k)),
                         partial_euler(P, fam.dep, fam.I, x, k + 1, sig, fam.shadow)))
    F = sp.Integer(0)
    for z, a in legs:
        resid = normalize(a - sp.diff(F, z))
        if resid == 0 or is_zero(resid):
            continue
        F = normalize(F + antiderivative(resid, z))
    if not is_zero(total_derivative(F, x, sig) - P):
        raise NotInImage("line integral did not reproduce P")
    return F


def lambda_integral(e, lam=LAMBDA):
    """lim_{lambda->1} of the lambda-antiderivative, logs of lambda dropped."""
    A = antiderivative(normalize(e), lam)
    return normalize(A.xreplace({lam: sp.Integer(1)}))


def invert_dx_homotopy(f, fam: Family, sig: Signature):
    """pi(F) for f = D_x F via the partial homotopy over one family."""
    f = normalize(f)
    if f == 0:
        return sp.Integer(0)
    if not is_zero(partial_euler(f, fam.dep, fam.I, fam.x, 0, sig, fam.shadow)):
        raise NotInKernel("f is not annihilated by the partial Euler operator")
    kmax = max((c.index[fam.x] for c in fam.members_in(f, sig)), default=0)
    integrand = sp.Integer(0)
    for j in range(kmax):
        E = partial_euler(f, fam.dep, fam.I, fam.x, j + 1, sig, fam.shadow)
        integrand += sig.sym(fam.member(j)) * partial_scale(E, fam, sig)
    return lambda_integral(integrand, fam.lam)


def _scale_all(e, sig, lam):
    reps = {sig.sym(c): lam * sig.sym(c) for c in sig.jets(e)}
    return normalize(sp.sympify(e).xreplace(reps))


def _check_polynomial(P, sig):
    syms = sorted(sig.jet_symbols(P), key=str)
    if syms and not sp.sympify(P).is_polynomial(*syms):
        raise NonPolynomial("homotopy oracle needs P polynomial in the jet variables")


def homotopy_1d_standard(P, x: int, sig: Signature):
    """The p = 1 standard homotopy formula; other variables are parameters.

    Each u^alpha_I (I free of x) counts as its own dependent variable.
    """
    P = normalize(P)
    if P == 0:
        return sp.Integer(0)
    _check_polynomial(P, sig)
    lam = sp.Symbol("mu", positive=True)
    fams = families_wrt(P, x, sig)
    for fam in fams:
        if not is_zero(partial_euler(P, fam.dep, fam.I, x, 0, sig, fam.shadow)):
            raise NotInImage("P is not a total x-derivative")
    integrand = sp.Integer(0)
    for fam in sorted(fams, key=_default_key(sig)):
        for i in range(1, fams[fam] + 1):
            L = higher_euler_1d(P, fam.dep, i, x, sig, fam.I)
            g = sig.sym(fam.base) * _scale_all(L, sig, lam)
            for _ in range(i - 1):
                g = total_derivative(g, x, sig)
            integrand += g
    F = lambda_integral(integrand, lam) if integrand != 0 else sp.Integer(0)
    base = normalize(sp.sympify(P).xreplace({sig.sym(c): 0 for c in sig.jets(P)}))
    if base != 0:
        F += lambda_integral(sig.x[x] * base.xreplace({sig.x[x]: lam * sig.x[x]}), lam)
    return normalize(F)


def _higher_euler(f, dep, I, sig):
    """Multi-variable higher Euler operator L^{I}_{u}(f)."""
    out = sp.Integer(0)
    for c in sig.jets(f):
        if c.dep != dep or c.shadow or any(k < i for k, i in zip(c.index, I)):
            continue
        coeff = 1
        for k, i in zip(c.index, I):
            coeff *= comb(k, i)
        g = coeff * sp.diff(f, sig.sym(c))
        for s, (k, i) in enumerate(zip(c.index, I)):
            for _ in range(k - i):
                g = -total_derivative(g, s, sig)
        out += g
    return normalize(out)


def homotopy_standard(C, sig: Signature):
    """Standard total homotopy operator for p >= 1 (polynomial C).

    Component l integrates sum_{I, i_l >= 1} (i_l/|I|) D^{I-1_l}(u L^I_u(C)[mu u])
    over mu in [0, 1]; for p = 1 this is the one-dimensional formula.
    """
    import itertools
    C = normalize(C)
    p = sig.p
    if C == 0:
        return [sp.Integer(0)] * p
    _check_polynomial(C, sig)
    lam = sp.Symbol("mu", positive=True)
    top = [0] * p
    for c in sig.jets(C):
        for s in range(p):
            top[s] = max(top[s], c.index[s])
    comps = []
    for l in range(p):
        integrand = sp.Integer(0)
        for dep in sig.dep_names:
            for I in itertools.product(*[range(t + 1) for t in top]):
                if I[l] < 1:
                    continue
                L = _higher_euler(C, dep, I, sig)
                if L == 0:
                    continue
                g = sig.jet(dep) * _scale_all(L, sig, lam)
                J = list(I)
                J[l] -= 1
                for s, k in enumerate(J):
                    for _ in range(k):
                        g = total_derivative(g, s, sig)
                integrand += sp.Rational(I[l], sum(I)) * g
        comps.append(lambda_integral(integrand, lam) if integrand != 0 else sp.Integer(0))
    return comps
