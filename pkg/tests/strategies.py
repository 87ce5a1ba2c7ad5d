"""Random differential expressions for the property suites."""
import os

import sympy as sp
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from divinv.expr import Signature, normalize

SIG = Signature(["x", "t"], ["u", "v"])
X, T = SIG.x

PROPERTY = settings(max_examples=int(os.environ.get("DIVINV_EXAMPLES", 200)), deadline=None,
                    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])

indices = st.tuples(st.integers(0, 2), st.integers(0, 2))
deps = st.sampled_from(SIG.dep_names)
jets = st.builds(lambda d, i: SIG.jet(d, i), deps, indices)
coeffs = st.integers(-4, 4).filter(bool)
x_factors = st.sampled_from([1, 1, 1, X, T, X * T, X**2])


low_jets = st.builds(lambda d, i: SIG.jet(d, i), deps, st.tuples(st.integers(0, 1), st.integers(0, 1)))


@st.composite
def monomials(draw, max_factors=3, x_factors=x_factors, jets=jets):
    n = draw(st.integers(1, max_factors))
    out = draw(coeffs) * draw(x_factors)
    for _ in range(n):
        out *= draw(jets) ** draw(st.integers(1, 2))
    return out


@st.composite
def polynomials(draw, max_terms=3, **kw):
    return normalize(sp.Add(*draw(st.lists(monomials(**kw), min_size=1, max_size=max_terms))))


nonpoly_factors = st.sampled_from([
    lambda: sp.exp(SIG.jet("u")),
    lambda: 1 / SIG.jet("v"),
    lambda: sp.sin(SIG.jet("u", (1, 0))),
    lambda: sp.log(SIG.jet("u")),
])


@st.composite
def expressions(draw, max_terms=3, **kw):
    """Polynomial in the jets, sometimes times a non-rational factor."""
    p = draw(polynomials(max_terms=max_terms, **kw))
    if draw(st.booleans()):
        p = p * draw(nonpoly_factors)()
    return normalize(p)


families = st.builds(lambda d, i: (d, i), deps, st.integers(0, 2))


@st.composite
def linear_divergences(draw):
    """sum_i D_i(f_i(x, t) u_J): a random linear total divergence."""
    comps = []
    for _ in range(SIG.p):
        terms = draw(st.lists(st.tuples(st.sampled_from([1, X, T, X * T, X**2, sp.exp(T)]),
                                        coeffs, deps, indices), min_size=0, max_size=2))
        comps.append(normalize(sp.Add(*[f * c * SIG.jet(d, i) for f, c, d, i in terms])))
    return comps
