import pytest

from divinv.errors import NotDivergence, NotLinear
from divinv.expr import Signature, is_zero, parse, term_count
from divinv.jet import divergence
from divinv.linear import invert_linear, split_linear
from divinv.rank import Ranking


def p(s, sig):
    return parse(s, sig)


def test_split_linear():
    sig = Signature(["x", "t"], ["u"])
    lin, rest = split_linear(p("x*u_t + u*u_x + 3*u_xx - exp(u)", sig), sig)
    assert lin == p("x*u_t + 3*u_xx", sig)
    assert rest == p("u*u_x - exp(u)", sig)


def test_kz_linear_part_by_criteria():
    sig = Signature(["x", "y", "t"], ["u"], {"f": ["t"]})
    C = p("(D(f;t)*y^3/6 + f*x*y)*(u_xt - u_yy)", sig)
    r = invert_linear(C, sig)
    want = [p("(D(f;t)*y^3/6 + f*x*y)*u_t", sig),
            p("(D(f;t)*y^2/2 + f*x)*u - (D(f;t)*y^3/6 + f*x*y)*u_y", sig),
            p("-f*y*u", sig)]
    assert all(is_zero(a - b) for a, b in zip(r.components, want))
    assert not r.groups


def test_parametric_inversion_and_alternatives():
    sig = Signature(["x", "t"], ["u"])
    C = p("exp(t - x^2)*(t*u_xtt + 2*x*(t + 1)*u_t)", sig)
    r = invert_linear(C, sig)
    assert is_zero(r.components[0] - p("t*exp(t - x^2)*u_tt", sig))
    assert is_zero(r.components[1] - p("2*x*t*exp(t - x^2)*u_t", sig))
    assert r.term_count == 2
    assert r.stop_order == 1
    l1, l2 = (g.params[0] for g in r.groups)
    assert r.assignment[l1] == 1
    alt = {n for a, n in r.candidates if a.get(l1) == 0 and a.get(l2) == 1}
    assert alt == {3}
    assert is_zero(divergence(r.components, sig) - C)


def test_rejects_nonlinear_and_non_divergence():
    sig = Signature(["x", "t"], ["u"])
    with pytest.raises(NotLinear):
        invert_linear(p("u*u_x", sig), sig)
    with pytest.raises(NotDivergence):
        invert_linear(p("x*u", sig), sig)


def test_ranking_prefers_lower_slot_on_ties():
    sig = Signature(["x", "t"], ["u"])
    C = p("u_xt", sig)
    a = invert_linear(C, sig, Ranking((0, 1), ("u",)))
    b = invert_linear(C, sig, Ranking((1, 0), ("u",)))
    assert term_count(a.components) == term_count(b.components) == 1
    assert a.components[0] == p("u_t", sig)
    assert b.components[1] == p("u_x", sig)
