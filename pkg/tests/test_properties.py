"""Randomized identities of the jet calculus and the inversion building blocks."""
import sympy as sp
from hypothesis import assume, given
from hypothesis import strategies as st

from divinv.expr import LAMBDA, is_zero, normalize, parse, to_text
from divinv.integrate import homotopy_1d_standard, invert_dx_line
from divinv.jet import (divergence, euler, euler_direct, is_divergence, partial_euler,
                        total_derivative)
from divinv.linear import invert_linear
from divinv.rank import Ranking, integrate_by_parts
from divinv.scale import Family, classify_scaling, partial_scale, project

from strategies import (PROPERTY, SIG, expressions, families, linear_divergences,
                        low_jets, polynomials)

slots = st.integers(0, 1)
orders = st.integers(0, 3)


def _I(x, other):
    idx = [0, 0]
    idx[1 - x] = other
    return tuple(idx)


@PROPERTY
@given(expressions(), families, slots)
def test_id1_partial_euler_kills_x_derivatives(f, fam, x):
    dep, other = fam
    assert partial_euler(total_derivative(f, x, SIG), dep, _I(x, other), x, 0, SIG) == 0


@PROPERTY
@given(expressions(), families, slots, st.integers(1, 3))
def test_id2_shifted_partial_euler(f, fam, x, k):
    dep, other = fam
    I = _I(x, other)
    below = list(I)
    below[x] = k - 1
    lhs = partial_euler(total_derivative(f, x, SIG), dep, I, x, k, SIG)
    rhs = sp.diff(f, SIG.jet(dep, tuple(below)))
    assert is_zero(lhs - rhs)


@PROPERTY
@given(expressions(), families, slots, orders)
def test_id3_commutation_with_other_derivative(f, fam, x, k):
    dep, other = fam
    i = 1 - x
    I = _I(x, other)
    lhs = partial_euler(total_derivative(f, i, SIG), dep, I, x, k, SIG)
    rhs = total_derivative(partial_euler(f, dep, I, x, k, SIG), i, SIG)
    if other:
        rhs += partial_euler(f, dep, _I(x, other - 1), x, k, SIG)
    assert is_zero(lhs - rhs)


@PROPERTY
@given(expressions(), families, slots, orders)
def test_uppE_recursion(f, fam, x, k):
    dep, other = fam
    I = _I(x, other)
    here = list(I)
    here[x] = k
    lhs = partial_euler(f, dep, I, x, k, SIG)
    rhs = sp.diff(f, SIG.jet(dep, tuple(here))) - \
        total_derivative(partial_euler(f, dep, I, x, k + 1, SIG), x, SIG)
    assert is_zero(lhs - rhs)


@PROPERTY
@given(expressions(), st.sampled_from(SIG.dep_names), slots)
def test_Eulp_factorization_matches_direct_euler(f, dep, x):
    assert is_zero(euler(f, dep, SIG, x=x) - euler_direct(f, dep, SIG))


@PROPERTY
@given(expressions(), families, slots)
def test_scaling_commutes_with_Dx(f, fam, x):
    dep, other = fam
    s = Family(x, dep, _I(x, other))
    lhs = partial_scale(total_derivative(f, x, SIG), s, SIG)
    rhs = total_derivative(partial_scale(f, s, SIG), x, SIG)
    assert is_zero(lhs - rhs)


@PROPERTY
@given(expressions(max_terms=4), families, slots)
def test_projection_idempotent_and_complement(f, fam, x):
    dep, other = fam
    s = Family(x, dep, _I(x, other))
    pf = project(f, s, SIG)
    assert is_zero(project(pf, s, SIG) - pf)
    assert project(normalize(f - pf), s, SIG) == 0
    assert classify_scaling(pf, s, SIG).zero_degree_terms == ()


@PROPERTY
@given(expressions(), slots)
def test_line_integral_round_trip(F, x):
    P = total_derivative(F, x, SIG)
    assume(P != 0)
    G = invert_dx_line(P, x, SIG)
    assert is_zero(total_derivative(G, x, SIG) - P)
    # G differs from F by a function of the other variable only
    diff = normalize(G - F)
    assert not SIG.depends_on_jets(diff) and not diff.has(SIG.x[x])


@PROPERTY
@given(polynomials(x_factors=st.just(1)), slots)
def test_standard_homotopy_agrees_with_line_integral(F, x):
    P = total_derivative(F, x, SIG)
    assume(P != 0)
    H = homotopy_1d_standard(P, x, SIG)
    assert is_zero(total_derivative(H, x, SIG) - P)
    assert not SIG.depends_on_jets(normalize(H - invert_dx_line(P, x, SIG)))


@PROPERTY
@given(expressions(max_terms=4), slots, st.permutations(SIG.dep_names))
def test_integration_by_parts_exact_and_stable(P, x, dep_order):
    r = Ranking((x, 1 - x), tuple(dep_order))
    res = integrate_by_parts(P, x, r, SIG)
    assert is_zero(total_derivative(res.F, x, SIG) + res.R - P)
    again = integrate_by_parts(res.R, x, r, SIG)
    assert again.F == 0 and is_zero(again.R - res.R)


@PROPERTY
@given(st.lists(expressions(jets=low_jets), min_size=2, max_size=2))
def test_divergence_criterion_holds_on_divergences(F):
    assert is_divergence(divergence(F, SIG), SIG)


@PROPERTY
@given(st.lists(polynomials(jets=low_jets), min_size=2, max_size=2), st.sampled_from(SIG.dep_names),
       st.tuples(st.integers(0, 2), st.integers(0, 2)), st.integers(-3, 3).filter(bool))
def test_divergence_criterion_fails_after_perturbation(F, dep, J, c):
    # E(c u_J^2) = 2c(-D)_J u_J, never zero
    C = divergence(F, SIG) + c * SIG.jet(dep, J) ** 2
    assert not is_divergence(C, SIG)


@PROPERTY
@given(linear_divergences())
def test_linear_inversion_exact(F):
    C = divergence(F, SIG)
    res = invert_linear(C, SIG)
    assert is_zero(divergence(res.components, SIG) - C)


@PROPERTY
@given(expressions(max_terms=4))
def test_normalize_idempotent(e):
    assert normalize(e) == e
    assert normalize(normalize(e) * 1) == normalize(e)


@PROPERTY
@given(expressions(max_terms=4))
def test_print_parse_round_trip(e):
    assert parse(to_text(e, SIG), SIG) == e
