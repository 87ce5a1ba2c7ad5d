import pytest

from divinv.expr import JetCoordinate, Signature, is_zero, parse
from divinv.jet import total_derivative
from divinv.rank import Ranking, heuristic_rank, integrate_by_parts


def p(s, sig):
    return parse(s, sig)


def test_derivative_dominant_order():
    r = Ranking((0, 1), ("u", "v"))
    J = lambda d, i: JetCoordinate(d, i)
    chain = [J("u", (0, 0)), J("v", (0, 0)), J("u", (1, 0)), J("v", (1, 0)), J("u", (2, 0)),
             J("u", (0, 1)), J("v", (0, 1)), J("u", (1, 1))]
    keys = [r.key(c) for c in chain]
    assert keys == sorted(keys)


def test_x_dominant_puts_x_order_first():
    r = Ranking((0, 1), ("u",), x=0)
    assert r.key(JetCoordinate("u", (1, 0))) > r.key(JetCoordinate("u", (0, 5)))


def test_ibp_harry_dym_split():
    sig = Signature(["x", "t"], ["u"])
    P = p("-8/3*u^2*u_xxxx - 16/3*u*u_x*u_xxx - 4*u*u_xx^2 + 4*u_x^2*u_xx - u_x^4/u", sig)
    res = integrate_by_parts(P, 0, Ranking.default(sig).x_dominant(0), sig)
    assert is_zero(res.F - p("-8/3*u^2*u_xxx + 4/3*u_x^3", sig))
    assert is_zero(res.R - p("-4*u*u_xx^2 - u_x^4/u", sig))


def test_ibp_stops_before_looping():
    sig = Signature(["x", "y"], ["u", "v"])
    P = p("v_xxx/u_y + u_xx/v_y", sig)
    res = integrate_by_parts(P, 0, Ranking((0, 1), ("v", "u")).x_dominant(0), sig)
    assert is_zero(res.F - p("v_xx/u_y + u_x/v_y", sig))
    assert is_zero(res.R - p("v_xx*u_xy/u_y^2 + u_x*v_xy/v_y^2", sig))
    assert is_zero(total_derivative(res.F, 0, sig) + res.R - P)


@pytest.mark.parametrize("indep, dep, arb, C, io, do", [
    (["x", "y"], ["u", "v"], {},
     "u_x*(2*u + v_y) - v_x*(u_y + 2*v_yy) + u_x/u^2 + v_yy/v_y + 2*u_y*ln(u)/u",
     ("y", "x"), ("u", "v")),
    (["x", "t"], ["u"], {}, "(u^2 + 2*u_xt)*(u_t - u*u_x - u_xxt)", ("x", "t"), ("u",)),
    (["x", "y", "t"], ["u"], {"f": ["t"]},
     "(D(f;t)*y^3/6 + f*x*y)*(u_xt - u*u_xx - u_x^2 - u_yy)", ("x", "y", "t"), ("u",)),
    (["x", "y", "t"], ["u"], {}, "t*(u_y*u_xttt - u_x*u_yttt)", ("x", "y", "t"), ("u",)),
    (["x", "t"], ["u", "v"], {},
     "u_t*(-v_t + u_xx + (u^2 + v^2)*u) + v_t*(u_t + v_xx + (u^2 + v^2)*v)",
     ("x", "t"), ("u", "v")),
])
def test_heuristic_rankings(indep, dep, arb, C, io, do):
    sig = Signature(indep, dep, arb)
    order, dep_order, _ = heuristic_rank(p(C, sig), sig)
    assert tuple(sig.indep_names[s] for s in order) == io
    assert tuple(dep_order) == do


def test_tie_report_names_declaration_order():
    sig = Signature(["x", "y"], ["u"])
    _, _, ties = heuristic_rank(p("u_x*u_y", sig), sig)
    assert ties and "declaration order" in ties[0]
