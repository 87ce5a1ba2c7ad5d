import sympy as sp

from divinv.expr import LAMBDA, Signature, is_zero, parse
from divinv.scale import Family, classify_scaling, partial_scale, project, shadow_shift, zero_shadows

SIG = Signature(["x", "y"], ["u", "v"])
AWK = "u_x*(2*u + v_y) - v_x*(u_y + 2*v_yy) + u_x/u^2 + v_yy/v_y + 2*u_y*ln(u)/u"
Fu = Family(1, "u", (0, 0))
Fv = Family(1, "v", (0, 0))


def p(s):
    return parse(s, SIG)


def test_partial_scaling_of_awkward_divergence():
    got = partial_scale(p(AWK), Fu, SIG)
    want = (LAMBDA * p("2*u*u_x - v_x*u_y") + p("u_x/u^2") / LAMBDA**2
            + p("2*u_y/u") * sp.log(LAMBDA)
            + p("u_x*v_y - 2*v_x*v_yy + v_yy/v_y + 2*u_y*ln(u)/u"))
    assert is_zero(got - want)


def test_both_scalings_poor_with_expected_zero_degree_terms():
    cu = classify_scaling(p(AWK), Fu, SIG)
    cv = classify_scaling(p(AWK), Fv, SIG)
    assert cu.kind == "poor" and cv.kind == "poor"
    assert set(cu.zero_degree_terms) == {p("2*u_y*ln(u)/u")}
    assert set(cv.zero_degree_terms) == {p("v_yy/v_y")}


def test_projection_keeps_good_part():
    assert is_zero(project(p(AWK), Fv, SIG) - p("u_x*v_y - 2*v_x*v_yy"))
    assert classify_scaling(p("u*u_y"), Fu, SIG).kind == "good"


def test_shadow_shift_round_trip():
    t = p("v_yy/v_y")
    shifted = shadow_shift(t, Fv, [t], SIG)
    assert shifted != t
    assert is_zero(zero_shadows(shifted, SIG) - t)
