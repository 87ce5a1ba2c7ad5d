"""Command-line front end and the line-oriented problem-file format.

A problem file holds one statement per line; ``#`` starts a comment::

    indep: x t
    dep: u
    arb: f(x,t)
    const: eps
    rule: D(f;t) = -D(f;x,x)
    rank: x < t; u
    symmetry G1: x=-x u=v v=u
    mode: invert
    C = (u^2 + 2*u_xt)*(u_t - u*u_x - u_xxt)
    F1 = ...
    expect total = 5
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass, field

import sympy as sp

from .errors import InversionError, ParseError
from .expr import Relation, Signature, is_zero, normalize, parse, term_count, to_text
from .integrate import homotopy_1d_standard, homotopy_standard, invert_dx_line
from .inverter import (DivergenceProblem, Symmetry, invert_curl, invert_divergence,
                       invert_with_symmetries)
from .jet import divergence, euler, partial_euler, total_derivative
from .linear import invert_linear, split_linear
from .rank import Ranking, heuristic_rank, integrate_by_parts

_DECL = re.compile(r"^(indep|dep|arb|const|rule|rank|mode|symmetry(?:\s+\w+)?)\s*:(.*)$")
_ASSIGN = re.compile(r"^(expect\s+)?([A-Za-z_]\w*)\s*=(.*)$")
_RULE_LHS = re.compile(r"^D\(\s*(\w+)\s*;\s*([\w\s,]+)\)$")


@dataclass
class Problem:
    sig: Signature
    exprs: dict                                  # name -> expression, in file order
    texts: dict                                  # name -> source text
    ranking: tuple | None = None                 # (indep names, dep names)
    symmetries: list = field(default_factory=list)   # (name, {var: image})
    mode: list = field(default_factory=list)     # default subcommand and its flags
    expect: dict = field(default_factory=dict)   # name -> raw text
    decls: list = field(default_factory=list)    # declaration lines, normalized

    def components(self, prefix="F"):
        out = []
        for i in range(1, self.sig.p + 1):
            if f"{prefix}{i}" not in self.exprs:
                break
            out.append(self.exprs[f"{prefix}{i}"])
        return out

    def to_text(self) -> str:
        lines = list(self.decls)
        lines += [f"{k} = {to_text(v, self.sig)}" for k, v in self.exprs.items()]
        lines += [f"expect {k} = {v}" for k, v in self.expect.items()]
        return "\n".join(lines) + "\n"


def _split_names(text):
    return [w for w in re.split(r"[\s,<]+", text.strip()) if w]


def _parse_arb(text):
    out = {}
    rest = re.sub(r"(\w+)\(([^()]*)\)", lambda m: out.setdefault(m.group(1), m.group(2)) and "", text)
    if rest.strip():
        raise ParseError(f"arb: cannot read {rest.strip()!r}; expected name(arg,...)")
    return {k: [a.strip() for a in v.split(",") if a.strip()] for k, v in out.items()}


def _parse_rule(text, sig):
    if "=" not in text:
        raise ParseError(f"rule: missing '=' in {text!r}")
    lhs, rhs = (s.strip() for s in text.split("=", 1))
    m = _RULE_LHS.match(lhs)
    if not m:
        raise ParseError(f"rule: left side must look like D(f;t), got {lhs!r}")
    func, vs = m.group(1), _split_names(m.group(2))
    if func not in sig.arb:
        raise ParseError(f"rule: {func} is not a declared arbitrary function")
    if len(set(vs)) != 1 or vs[0] not in sig.indep_names:
        raise ParseError(f"rule: left side must differentiate in one variable, got {lhs!r}")
    return Relation(func, sig.x[sig.slot(vs[0])], len(vs), parse(rhs, sig))


def _parse_symmetry(text):
    spec = {}
    for item in text.split():
        if "=" not in item:
            raise ParseError(f"symmetry: expected var=image, got {item!r}")
        k, v = item.split("=", 1)
        spec[k.strip()] = v.strip()
    return spec


def load_problem(text: str) -> Problem:
    decl = {"indep": None, "dep": None, "arb": {}, "const": [], "rule": [], "rank": None,
            "mode": [], "symmetry": []}
    assigns, expects, decls = [], {}, []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _DECL.match(line)
        if m:
            key, val = m.group(1), m.group(2).strip()
            decls.append(f"{key}: {val}")
            if key.startswith("symmetry"):
                name = key.split()[1] if " " in key else f"S{len(decl['symmetry']) + 1}"
                decl["symmetry"].append((name, _parse_symmetry(val)))
            elif key in ("indep", "dep"):
                decl[key] = _split_names(val)
            elif key == "const":
                decl["const"] += _split_names(val)
            elif key == "arb":
                decl["arb"].update(_parse_arb(val))
            elif key == "rule":
                decl["rule"].append(val)
            elif key == "rank":
                if ";" not in val:
                    raise ParseError(f"line {n}: rank needs 'indep order; dep order'")
                a, b = val.split(";", 1)
                decl["rank"] = (tuple(_split_names(a)), tuple(_split_names(b)))
            elif key == "mode":
                decl["mode"] = val.split()
            continue
        m = _ASSIGN.match(line)
        if not m:
            raise ParseError(f"line {n}: cannot read {raw.strip()!r}")
        if m.group(1):
            expects[m.group(2)] = m.group(3).strip()
        else:
            assigns.append((m.group(2), m.group(3).strip()))
    if not decl["indep"] or not decl["dep"]:
        raise ParseError("problem file needs 'indep:' and 'dep:' lines")
    sig = Signature(decl["indep"], decl["dep"], decl["arb"], decl["const"])
    if decl["rule"]:
        sig = sig.with_relations([_parse_rule(r, sig) for r in decl["rule"]])
    exprs, texts = {}, {}
    for name, t in assigns:
        if name in exprs:
            raise ParseError(f"expression {name} defined twice")
        exprs[name] = parse(t, sig)
        texts[name] = t
    if decl["rank"]:
        io, do = decl["rank"]
        bad = [v for v in io if v not in sig.indep_names] + [d for d in do if d not in sig.dep_names]
        if bad:
            raise ParseError(f"rank: unknown names {bad}")
    for name, spec in decl["symmetry"]:
        try:
            Symmetry.parse(spec, sig)
        except ValueError as e:
            raise ParseError(f"symmetry {name}: {e}") from None
    return Problem(sig, exprs, texts, decl["rank"], decl["symmetry"], decl["mode"],
                   expects, decls)


def read_problem(path: str) -> Problem:
    try:
        with open(path) as fh:
            return load_problem(fh.read())
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e.strerror}") from None


# ---------------------------------------------------------------------------
# commands; each returns a result dict with printable fields


def _need(prob, name="C"):
    if name not in prob.exprs:
        raise ParseError(f"problem file has no expression {name}")
    return prob.exprs[name]


def _slot(prob, name):
    if name is None:
        if prob.sig.p == 1:
            return 0
        raise ParseError("--x is required when there is more than one independent variable")
    if name not in prob.sig.indep_names:
        raise ParseError(f"--x: unknown independent variable {name}")
    return prob.sig.slot(name)


def _ranking_override(prob, args):
    io = _split_names(args.rank_indep) if getattr(args, "rank_indep", None) else None
    do = _split_names(args.rank_dep) if getattr(args, "rank_dep", None) else None
    if io is None and do is None:
        return prob.ranking
    base_io, base_do = prob.ranking or (prob.sig.indep_names, prob.sig.dep_names)
    io, do = tuple(io or base_io), tuple(do or base_do)
    bad = [v for v in io if v not in prob.sig.indep_names] + \
          [d for d in do if d not in prob.sig.dep_names]
    if bad:
        raise ParseError(f"ranking flags name unknown variables {bad}")
    return io, do


def _ranking(prob, args) -> Ranking:
    ov = _ranking_override(prob, args)
    sig = prob.sig
    if ov is None:
        return Ranking.default(sig)
    io = tuple(sig.slot(v) for v in ov[0])
    io += tuple(s for s in range(sig.p) if s not in io)
    do = tuple(ov[1]) + tuple(d for d in sig.dep_names if d not in ov[1])
    return Ranking(io, do)


def _components_result(comps, sig, **extra):
    out = {"components": list(comps), "term_counts": [term_count(c) for c in comps],
           "total": term_count(list(comps))}
    out.update(extra)
    return out


def cmd_invert(prob, args):
    C = _need(prob)
    split = {"auto": None, "always": True, "never": False}[args.linear_split]
    dp = DivergenceProblem(prob.sig, C, _ranking_override(prob, args), split,
                           verify=not args.no_verify)
    if prob.symmetries and not args.no_symmetry:
        syms = [(n, Symmetry.parse(s, prob.sig)) for n, s in prob.symmetries]
        r = invert_with_symmetries(dp, syms)
        parts = [{"label": lbl, "part": part, "terms": None if c is None else term_count(c)}
                 for lbl, part, c in r.parts]
        return _components_result(r.components, prob.sig, iterations=r.iterations,
                                  ranking=None, tie_report=[], verified=r.verified,
                                  linear_pass=False, parts=parts, trace=[])
    r = invert_divergence(dp)
    return _components_result(r.components, prob.sig, iterations=r.iterations,
                              ranking=r.ranking.describe(prob.sig), tie_report=r.tie_report,
                              verified=r.verified, linear_pass=r.linear_pass, trace=r.trace)


def cmd_verify(prob, args):
    sig = prob.sig
    C = _need(prob)
    E = {d: euler(C, d, sig) for d in sig.dep_names}
    crit = all(is_zero(e) for e in E.values())
    out = {"euler": E, "divergence_criterion": crit}
    comps = prob.components()
    if comps:
        if len(comps) != sig.p:
            raise ParseError(f"expected F1..F{sig.p}, found {len(comps)} components")
        resid = normalize(divergence(comps, sig) - C)
        out.update(_components_result(comps, sig))
        out["residual"] = resid
        out["components_match"] = resid == 0
    out["verified"] = crit and out.get("components_match", True)
    return out


def cmd_euler(prob, args):
    sig = prob.sig
    C = _need(prob)
    deps = [args.u] if args.u else list(sig.dep_names)
    for d in deps:
        if d not in sig.dep_names:
            raise ParseError(f"--u: unknown dependent variable {d}")
    return {"euler": {d: euler(C, d, sig) for d in deps}}


def _family(prob, text, x):
    sig = prob.sig
    e = parse(text, sig)
    c = sig.coord(e) if isinstance(e, sp.Symbol) else None
    if c is None:
        raise ParseError(f"--u must name a jet variable such as u or u_t, got {text!r}")
    if c.index[x]:
        raise ParseError(f"--u {text} already carries a derivative in {sig.indep_names[x]}")
    return c


def cmd_peuler(prob, args):
    sig = prob.sig
    C = _need(prob)
    x = _slot(prob, args.x)
    c = _family(prob, args.u, x)
    E = partial_euler(C, c.dep, c.index, x, args.k, sig)
    return {"family": f"[{args.u}]_{sig.indep_names[x]}", "k": args.k, "result": E}


def cmd_dx(prob, args):
    sig = prob.sig
    P = _need(prob, args.expr)
    x = _slot(prob, args.x)
    F = invert_dx_line(P, x, sig)
    ok = is_zero(total_derivative(F, x, sig) - P)
    return _components_result([F], sig, verified=ok)


def cmd_ibp(prob, args):
    sig = prob.sig
    P = _need(prob, args.expr)
    x = _slot(prob, args.x)
    res = integrate_by_parts(P, x, _ranking(prob, args), sig)
    ok = is_zero(total_derivative(res.F, x, sig) + res.R - P)
    return {"components": [res.F], "term_counts": [term_count(res.F)],
            "total": term_count(res.F), "remainder": res.R, "verified": ok}


def cmd_linear(prob, args):
    sig = prob.sig
    C = _need(prob)
    lin, rest = split_linear(C, sig)
    r = invert_linear(lin, sig, _ranking(prob, args))
    return _components_result(
        r.components, sig, linear_part=lin, nonlinear_part=rest,
        parametric=r.parametric,
        parameters={str(p): [sig.indep_names[s] for s in g.slots]
                    for g in r.groups for p in g.params},
        assignment={str(k): v for k, v in r.assignment.items()},
        candidates=[{"assignment": {str(k): v for k, v in a.items()}, "terms": n}
                    for a, n in r.candidates],
        verified=is_zero(divergence(r.components, sig) - lin))


def cmd_curl(prob, args):
    sig = prob.sig
    F = prob.components()
    if sig.p != 3 or len(F) != 3:
        raise ParseError("curl needs three independent variables and F1, F2, F3")
    G = invert_curl(F, sig)
    return _components_result(G, sig, verified=True)


def cmd_homotopy1d(prob, args):
    sig = prob.sig
    C = _need(prob, args.expr)
    if args.x is not None or sig.p == 1:
        x = _slot(prob, args.x)
        F = homotopy_1d_standard(C, x, sig)
        ok = is_zero(total_derivative(F, x, sig) - C)
        return _components_result([F], sig, verified=ok)
    comps = homotopy_standard(C, sig)
    return _components_result(comps, sig, verified=is_zero(divergence(comps, sig) - C))


def cmd_rank(prob, args):
    sig = prob.sig
    io, do, ties = heuristic_rank(_need(prob), sig)
    return {"ranking": Ranking(io, do).describe(sig), "tie_report": ties}


COMMANDS = {
    "invert": cmd_invert, "verify": cmd_verify, "euler": cmd_euler, "peuler": cmd_peuler,
    "dx": cmd_dx, "ibp": cmd_ibp, "linear": cmd_linear, "curl": cmd_curl,
    "homotopy1d": cmd_homotopy1d, "rank": cmd_rank,
}


# ---------------------------------------------------------------------------
# output


def _plain(v, sig):
    if isinstance(v, sp.Basic):
        return to_text(v, sig)
    if isinstance(v, dict):
        return {str(k): _plain(x, sig) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x, sig) for x in v]
    return v


def _trace_plain(trace, sig):
    return [{k: _plain(v, sig) if not isinstance(v, (int, float, bool, type(None))) else v
             for k, v in ev.items()} if isinstance(ev, dict) else str(ev) for ev in trace]


def to_json(result, sig, with_trace=False) -> str:
    data = {k: v for k, v in result.items() if k != "trace"}
    data = _plain(data, sig)
    if with_trace:
        data["trace"] = _trace_plain(result.get("trace", []), sig)
    return json.dumps(data, indent=2, sort_keys=True, default=str)


def _fmt_bool(b):
    return "n/a" if b is None else str(bool(b)).lower()


def to_lines(result, sig, with_trace=False) -> list[str]:
    out = []
    if result.get("ranking"):
        out.append(f"ranking: {result['ranking']}")
    for t in result.get("tie_report", []):
        out.append(f"tie: {t}")
    for name, v in result.get("euler", {}).items():
        out.append(f"E_{name} = {to_text(v, sig)}")
    if "divergence_criterion" in result:
        out.append(f"divergence criterion: {_fmt_bool(result['divergence_criterion'])}")
    if "family" in result:
        out.append(f"family: {result['family']}, k = {result['k']}")
        out.append(f"result = {to_text(result['result'], sig)}")
    if "linear_part" in result:
        out.append(f"linear part = {to_text(result['linear_part'], sig)}")
        out.append(f"nonlinear part = {to_text(result['nonlinear_part'], sig)}")
        for i, c in enumerate(result["parametric"], 1):
            out.append(f"parametric F{i} = {to_text(c, sig)}")
        for p, slots in result["parameters"].items():
            out.append(f"parameter {p}: weight on {slots[0]} (split over {', '.join(slots)})")
        for cand in result["candidates"]:
            a = ", ".join(f"{k} = {to_text(v, sig)}" for k, v in sorted(cand["assignment"].items()))
            out.append(f"candidate {{{a}}}: {cand['terms']} terms")
        a = ", ".join(f"{k} = {to_text(v, sig)}" for k, v in sorted(result["assignment"].items()))
        out.append(f"chosen: {{{a}}}")
    for part in result.get("parts", []):
        n = "rejected" if part["terms"] is None else f"{part['terms']} terms"
        out.append(f"part {part['label']}: {n}")
    if "components" in result:
        for i, (c, n) in enumerate(zip(result["components"], result["term_counts"]), 1):
            out.append(f"F{i} = {to_text(c, sig)}    [{n} term{'s' if n != 1 else ''}]")
        out.append(f"total terms: {result['total']}")
    if "remainder" in result:
        out.append(f"R = {to_text(result['remainder'], sig)}")
    if "residual" in result:
        out.append(f"residual = {to_text(result['residual'], sig)}")
    if "iterations" in result:
        out.append(f"iterations: {result['iterations']}")
    if result.get("linear_pass"):
        out.append("linear pass: yes")
    if "verified" in result:
        out.append(f"verified: {_fmt_bool(result['verified'])}")
    if with_trace:
        for ev in _trace_plain(result.get("trace", []), sig):
            out.append("trace: " + json.dumps(ev, sort_keys=True, default=str))
    return out


# ---------------------------------------------------------------------------
# expectations (used by the corpus runner)


def check_expectations(prob: Problem, result) -> list[tuple[str, bool, str]]:
    """(key, ok, detail) for each ``expect`` line of the problem file."""
    sig = prob.sig
    rows = []
    comps = result.get("components", [])
    for key, want in prob.expect.items():
        m = re.fullmatch(r"F(\d+)", key)
        if m:
            i = int(m.group(1)) - 1
            if i >= len(comps):
                rows.append((key, False, "no such component"))
                continue
            got = comps[i]
            ok = is_zero(got - parse(want, sig))
            rows.append((key, ok, to_text(got, sig)))
            continue
        if key in ("remainder", "R"):
            got = result.get("remainder", sp.Integer(0))
            rows.append((key, is_zero(got - parse(want, sig)), to_text(got, sig)))
            continue
        got = result.get(key)
        if isinstance(got, bool) or got is None:
            got_s = _fmt_bool(got)
        else:
            got_s = str(_plain(got, sig))
        rows.append((key, got_s == want.strip(), got_s))
    return rows


# ---------------------------------------------------------------------------
# argument parsing


def _common(p):
    p.add_argument("file", help="problem file")
    p.add_argument("--rank-indep", help="independent variables, lowest first (a,b,c)")
    p.add_argument("--rank-dep", help="dependent variables, lowest first (u,v)")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--trace", action="store_true", help="include the iteration trace")
    p.add_argument("--no-verify", action="store_true", help="skip the exactness check")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="divinv", description="Invert total divergences.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("invert", help="invert C = D_i F^i")
    _common(p)
    p.add_argument("--linear-split", choices=["auto", "always", "never"], default="auto")
    p.add_argument("--no-symmetry", action="store_true",
                   help="ignore symmetry lines of the problem file")
    p = sub.add_parser("verify", help="divergence criterion and component check")
    _common(p)
    p = sub.add_parser("euler", help="Euler operator of C")
    _common(p)
    p.add_argument("--u", help="dependent variable (default: all)")
    p = sub.add_parser("peuler", help="partial Euler operator of C")
    _common(p)
    p.add_argument("--x", help="independent variable")
    p.add_argument("--u", required=True, help="family base, e.g. u or u_t")
    p.add_argument("--k", type=int, default=0, help="order of the operator")
    for name, hlp in (("dx", "line-integral inversion of D_x"),
                      ("ibp", "integration by parts in one variable"),
                      ("homotopy1d", "standard homotopy formula (oracle)")):
        p = sub.add_parser(name, help=hlp)
        _common(p)
        p.add_argument("--x", help="independent variable")
        p.add_argument("--expr", default="C", help="expression name (default C)")
    p = sub.add_parser("linear", help="linear inversion with parameters")
    _common(p)
    p = sub.add_parser("curl", help="invert F = Curl G from F1, F2, F3")
    _common(p)
    p = sub.add_parser("rank", help="heuristic ranking and tie report")
    _common(p)
    p = sub.add_parser("check", help="run problem files and compare their expect lines")
    p.add_argument("files", nargs="+")
    p.add_argument("--json", action="store_true")
    return ap


def run_file(path: str, argv_extra=()):
    """(problem, result) for the file's ``mode:`` line plus extra flags."""
    prob = read_problem(path)
    mode = prob.mode or ["invert"]
    args = build_parser().parse_args([mode[0], path, *mode[1:], *argv_extra])
    return prob, COMMANDS[args.command](prob, args)


def _check(files, as_json, out):
    failed = 0
    report = []
    for path in files:
        try:
            prob, result = run_file(path)
            rows = check_expectations(prob, result)
            err = None
        except InversionError as e:
            rows, err = [], f"{type(e).__name__}: {e}"
        ok = err is None and all(r[1] for r in rows)
        failed += not ok
        report.append({"file": path, "ok": ok, "error": err,
                       "checks": [{"key": k, "ok": o, "got": g} for k, o, g in rows]})
    if as_json:
        print(json.dumps(report, indent=2, sort_keys=True), file=out)
    else:
        for r in report:
            print(f"{'PASS' if r['ok'] else 'FAIL'} {r['file']}", file=out)
            if r["error"]:
                print(f"    error: {r['error']}", file=out)
            for c in r["checks"]:
                if not c["ok"]:
                    print(f"    {c['key']}: got {c['got']}", file=out)
    return 1 if failed else 0


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    try:
        if args.command == "check":
            return _check(args.files, args.json, out)
        prob = read_problem(args.file)
        result = COMMANDS[args.command](prob, args)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except InversionError as e:
        print(f"{args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    if args.json:
        print(to_json(result, prob.sig, args.trace), file=out)
    else:
        print("\n".join(to_lines(result, prob.sig, args.trace)), file=out)
    if result.get("verified") is False:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
