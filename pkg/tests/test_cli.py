import io
import json
import pathlib

import pytest

from divinv.cli import load_problem, main
from divinv.errors import ParseError
from divinv.expr import parse

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "corpus"


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def test_invert_bbm_text():
    code, out = run("invert", CORPUS / "bbm.prob")
    assert code == 0
    assert "F1 = -u^4/4 + u_t^2 - u_xt^2 - u^2*u_xt    [4 terms]" in out
    assert "total terms: 5" in out and "iterations: 2" in out and "verified: true" in out


def test_json_schema_and_determinism():
    code, a = run("invert", CORPUS / "kz.prob", "--json")
    _, b = run("invert", CORPUS / "kz.prob", "--json")
    assert code == 0 and a == b
    data = json.loads(a)
    for key in ("components", "term_counts", "iterations", "ranking", "tie_report", "verified"):
        assert key in data
    assert data["linear_pass"] is True


def test_trace_flag_lists_iterations():
    _, out = run("invert", CORPUS / "poor_scaling.prob", "--json", "--trace")
    trace = json.loads(out)["trace"]
    its = [e for e in trace if e["event"] == "iteration"]
    assert len(its) == 2 and all(e["shadows"] for e in its)


def test_verify_seventeen_term_pair():
    code, out = run("verify", CORPUS / "bbm_homotopy_verify.prob")
    assert code == 0
    assert "total terms: 17" in out and "verified: true" in out


def test_empty_problem():
    code, out = run("invert", CORPUS / "empty.prob")
    assert code == 0
    assert "F1 = 0" in out and "F2 = 0" in out and "iterations: 0" in out


def test_rank_override_flags(tmp_path):
    code, out = run("invert", CORPUS / "high_order_xy.prob", "--rank-indep", "y,x")
    assert code == 0
    assert "ranking: y < x; u" in out
    assert "F2 = u_xxxxx*u_yyy - u_xxxxxy*u_yy" in out


def test_other_subcommands():
    assert run("dx", CORPUS / "line_integral.prob", "--x", "x")[0] == 0
    code, out = run("euler", CORPUS / "bbm.prob")
    assert code == 0 and "E_u = 0" in out
    code, out = run("peuler", CORPUS / "harry_dym.prob", "--x", "x", "--u", "u_t")
    assert code == 0 and "result = " in out
    code, out = run("ibp", CORPUS / "bbm.prob", "--x", "x")
    assert code == 0 and "R = " in out
    code, out = run("linear", CORPUS / "linear_parametric.prob")
    assert code == 0 and "candidate" in out and "total terms: 2" in out
    code, out = run("curl", CORPUS / "curl.prob")
    assert code == 0 and "F1 = u_y*u_z" in out
    code, out = run("rank", CORPUS / "nls.prob")
    assert code == 0 and "ranking: x < t; u < v" in out


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.prob"
    bad.write_text("indep: x t\ndep: u\nC = u*u_t^2\n")
    assert run("invert", bad)[0] == 1
    assert run("verify", bad)[0] == 1
    broken = tmp_path / "broken.prob"
    broken.write_text("indep: x t\ndep: u\nC = u_q\n")
    assert run("invert", broken)[0] == 2
    assert run("invert", tmp_path / "missing.prob")[0] == 2
    assert run("frobnicate")[0] == 2
    assert run("peuler", CORPUS / "bbm.prob", "--u", "u")[0] == 2


def test_problem_file_round_trip():
    text = (CORPUS / "potential_burgers.prob").read_text()
    prob = load_problem(text)
    again = load_problem(prob.to_text())
    assert again.exprs == prob.exprs
    assert again.sig.relations == prob.sig.relations
    assert prob.exprs["C"] == parse("f*exp(u/2)*(u_t - u_xx - u_x^2/2)", prob.sig)


@pytest.mark.parametrize("text", [
    "dep: u\nC = u\n",
    "indep: x\ndep: u\nC = \n",
    "indep: x\ndep: u\nrule: f = 1\n",
    "indep: x\ndep: u\narb: f(x)\nrule: D(f;x,t) = 0\n",
    "indep: x\ndep: u\nrank: x\n",
    "indep: x\ndep: u\nthis is not a statement\n",
    "indep: x\ndep: u\nsymmetry S: x=y\n",
])
def test_problem_parse_errors(text):
    with pytest.raises(ParseError):
        load_problem(text)
