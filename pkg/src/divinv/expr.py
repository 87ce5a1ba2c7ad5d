"""Expression kernel over jet coordinates.

Expressions are plain sympy objects.  Jet coordinates are sympy Symbols
registered in a :class:`Signature`, arbitrary functions are undefined sympy
functions applied to their declared arguments, and ``log`` carries
absolute-value semantics.  :func:`normalize` produces the canonical
fully-expanded form used everywhere for equality and term counting.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

import sympy as sp
from sympy.core.function import AppliedUndef

from .errors import ParseError

LAMBDA = sp.Symbol("lambda", positive=True)

MultiIndex = tuple  # tuple[int, ...], one slot per independent variable


@dataclass(frozen=True, order=True)
class JetCoordinate:
    dep: str
    index: MultiIndex
    shadow: bool = False

    @property
    def order(self) -> int:
        return sum(self.index)

    def shifted(self, slot: int, by: int = 1) -> "JetCoordinate":
        idx = list(self.index)
        idx[slot] += by
        if idx[slot] < 0:
            raise ValueError("negative derivative order")
        return JetCoordinate(self.dep, tuple(idx), self.shadow)

    def base(self) -> "JetCoordinate":
        return JetCoordinate(self.dep, (0,) * len(self.index), self.shadow)


@dataclass(frozen=True)
class Relation:
    """Rewrite ``D(func; var^count) -> rhs`` applied inside any derivative."""

    func: str
    var: sp.Symbol
    count: int
    rhs: sp.Expr


class Signature:
    """Variables of a problem plus the jet-symbol registry.

    Names must be unique across independent variables, dependent variables,
    arbitrary functions and constants.
    """

    def __init__(self, indep: Iterable[str], dep: Iterable[str],
                 arb: Mapping[str, Iterable] | None = None,
                 constants: Iterable[str] = (),
                 relations: Iterable[Relation] = ()):
        self.indep_names = tuple(indep)
        self.dep_names = tuple(dep)
        self.const_names = tuple(constants)
        if not self.indep_names or not self.dep_names:
            raise ParseError("need at least one independent and one dependent variable")
        self.x = tuple(sp.Symbol(n) for n in self.indep_names)
        self.constants = tuple(sp.Symbol(n) for n in self.const_names)
        self.arb: dict[str, sp.Expr] = {}
        names = list(self.indep_names) + list(self.dep_names) + list(self.const_names)
        for name, args in (arb or {}).items():
            args = tuple(sp.sympify(a, locals=self._locals()) for a in args)
            self.arb[name] = sp.Function(name)(*args)
            names.append(name)
        if len(set(names)) != len(names):
            raise ParseError(f"duplicate names in signature: {names}")
        self.relations = tuple(relations)
        self._short = all(len(n) == 1 for n in self.indep_names)
        self._sym_of: dict[JetCoordinate, sp.Symbol] = {}
        self._coord_of: dict[sp.Symbol, JetCoordinate] = {}

    @property
    def p(self) -> int:
        return len(self.x)

    def _locals(self):
        d = {n: s for n, s in zip(self.indep_names, getattr(self, "x", ()))}
        d.update({n: s for n, s in zip(self.const_names, getattr(self, "constants", ()))})
        return d

    def with_relations(self, relations) -> "Signature":
        sig = Signature(self.indep_names, self.dep_names, {}, self.const_names, relations)
        sig.arb = dict(self.arb)
        return sig

    # jets ---------------------------------------------------------------
    def jet_text(self, c: JetCoordinate) -> str:
        name = c.dep.upper() if c.shadow else c.dep
        if c.shadow and (name in self.dep_names or name == c.dep):
            name = c.dep + "'"
        if c.order == 0:
            return name
        if self._short:
            return name + "_" + "".join(v * k for v, k in zip(self.indep_names, c.index))
        vs = [v for v, k in zip(self.indep_names, c.index) for _ in range(k)]
        return f"D({name}; {','.join(vs)})"

    def jet(self, dep: str, index=None, shadow: bool = False) -> sp.Symbol:
        if index is None:
            index = (0,) * self.p
        c = JetCoordinate(dep, tuple(index), shadow)
        return self.sym(c)

    def sym(self, c: JetCoordinate) -> sp.Symbol:
        s = self._sym_of.get(c)
        if s is None:
            if c.dep not in self.dep_names or len(c.index) != self.p:
                raise ValueError(f"bad jet coordinate {c}")
            s = sp.Symbol(self.jet_text(c))
            self._sym_of[c] = s
            self._coord_of[s] = c
        return s

    def coord(self, s) -> JetCoordinate | None:
        return self._coord_of.get(s)

    def jets(self, e) -> set[JetCoordinate]:
        return {self._coord_of[s] for s in sp.sympify(e).free_symbols if s in self._coord_of}

    def jet_symbols(self, e) -> set[sp.Symbol]:
        return {s for s in sp.sympify(e).free_symbols if s in self._coord_of}

    def depends_on_jets(self, e) -> bool:
        return any(s in self._coord_of for s in sp.sympify(e).free_symbols)

    def slot(self, var) -> int:
        name = str(var)
        if name not in self.indep_names:
            raise ValueError(f"unknown independent variable {name}")
        return self.indep_names.index(name)

    # relations ----------------------------------------------------------
    def apply_relations(self, e):
        if not self.relations:
            return e
        for _ in range(50):
            reps = {}
            for d in e.atoms(sp.Derivative):
                r = self._rewrite_derivative(d)
                if r is not None:
                    reps[d] = r
            if not reps:
                return e
            e = e.xreplace(reps)
        raise RuntimeError("relation rewriting did not terminate")

    def _rewrite_derivative(self, d: sp.Derivative):
        inner = d.expr
        if not isinstance(inner, AppliedUndef):
            return None
        counts = dict(d.variable_count)
        for rel in self.relations:
            if inner.func.__name__ != rel.func or counts.get(rel.var, 0) < rel.count:
                continue
            rest = dict(counts)
            rest[rel.var] -= rel.count
            out = rel.rhs
            for v, k in rest.items():
                if k:
                    out = sp.diff(out, v, k)
            return out
        return None


# ---------------------------------------------------------------------------
# normal form

def _is_nonmonomial(b, ex) -> bool:
    return b.is_Add and not (ex.is_Integer and ex > 0)


def _factors(t):
    out = []
    for f in sp.Mul.make_args(t):
        if f.is_Pow:
            out.append((f.base, f.exp))
        else:
            out.append((f, sp.Integer(1)))
    return out


def _ln(a):
    """log|a| split over products and powers."""
    if a.is_Number:
        if a == 0:
            raise ValueError("ln(0)")
        a = abs(a)
        return sp.Integer(0) if a == 1 else sp.log(a)
    if a.is_Mul:
        return sp.Add(*[_ln(f) for f in a.args])
    if a.is_Pow:
        return a.exp * _ln(a.base)
    if isinstance(a, sp.exp):
        return a.args[0]
    if a.is_Add:
        fa = sp.factor(a)
        if fa.is_Mul or fa.is_Pow:
            return _ln(fa)
        if fa.could_extract_minus_sign():
            fa = -fa
        return sp.log(fa)
    return sp.log(a)


def _exp(a):
    """exp(a) with exp(c*ln z) -> z^c for rational c."""
    keep, out = [], sp.Integer(1)
    for t in sp.Add.make_args(a):
        c, r = t.as_coeff_Mul()
        if isinstance(r, sp.log) and c.is_Rational:
            out *= r.args[0] ** c
        else:
            keep.append(t)
    return out * sp.exp(sp.Add(*keep))


def _prep(e):
    if e.is_Atom or isinstance(e, (sp.Derivative, sp.Subs, AppliedUndef)):
        return e
    if isinstance(e, sp.log):
        return _ln(normalize(e.args[0]))
    if isinstance(e, sp.exp):
        return _exp(normalize(e.args[0]))
    if isinstance(e, (sp.sin, sp.cos)):
        return e.func(normalize(e.args[0]))
    if e.is_Pow:
        b, ex = _prep(e.base), e.exp
        if b.is_Add:
            if ex.is_Integer and ex < 0:
                b = sp.factor(normalize(b))
            elif not ex.is_Integer:
                b = normalize(b)
                if b.is_Add:
                    # pull out the numeric content so (4+4u^2)^(1/2) -> 2(1+u^2)^(1/2)
                    c, prim = b.primitive()
                    if c != 1:
                        b = sp.Mul(c, prim, evaluate=False)
        return b ** ex
    return e.func(*[_prep(a) for a in e.args])


def _expand(e):
    if e.is_Add:
        return sp.Add(*[_expand(a) for a in e.args])
    if e.is_Mul:
        return _distribute([_expand(a) for a in e.args])
    if e.is_Pow:
        b = _expand(e.base)
        if b.is_Add and e.exp.is_Integer and e.exp > 0:
            return _expand(sp.expand_multinomial(b ** e.exp, deep=False))
        return b ** e.exp
    return e


def _distribute(factors):
    # sympy's expand_mul also multiplies out denominators; we must not
    sums = [sp.Add.make_args(f) for f in factors if f.is_Add]
    rest = sp.Mul(*[f for f in factors if not f.is_Add])
    out = [rest]
    for s in sums:
        out = [a * b for a in out for b in s]
    return sp.Add(*out)


def _merge_exps(t):
    fs = sp.Mul.make_args(t)
    ex = [f for f in fs if isinstance(f, sp.exp)]
    if len(ex) < 2:
        return t
    rest = [f for f in fs if not isinstance(f, sp.exp)]
    return sp.Mul(*rest) * sp.exp(sp.expand(sp.Add(*[f.args[0] for f in ex])))


def _generators(exprs):
    """Map every non-symbol atom factor to a fresh symbol, deterministically."""
    atoms = set()
    for e in exprs:
        for t in sp.Add.make_args(e):
            for b, ex in _factors(t):
                if b.is_Number:
                    continue
                if b.is_Symbol:
                    atoms.add(b)
                elif ex.is_Integer:
                    atoms.add(b)
                else:
                    atoms.add(b ** ex)
    ordered = sorted(atoms, key=sp.default_sort_key)
    gens, to, back = [], {}, {}
    for i, a in enumerate(ordered):
        if a.is_Symbol:
            gens.append(a)
        else:
            g = sp.Dummy(f"g{i}")
            gens.append(g)
            to[a] = g
            back[g] = a
    return gens, to, back


def _subst_atoms(e, to):
    out = []
    for t in sp.Add.make_args(e):
        fs = []
        for b, ex in _factors(t):
            if b in to:
                fs.append(to[b] ** ex)
            elif b ** ex in to:
                fs.append(to[b ** ex])
            else:
                fs.append(b ** ex)
        out.append(sp.Mul(*fs))
    return sp.Add(*out)


def _reduce_group(N, b, E, integer):
    """Rewrite N*b^E with every exact factor of b cancelled out of N."""
    gens, to, back = _generators([N, b])
    Nd, bd = _subst_atoms(N, to), _subst_atoms(b, to)
    if not bd.is_polynomial(*gens):
        return None
    L = sp.Integer(1)
    for g in gens:
        lo = 0
        for t in sp.Add.make_args(Nd):
            ex = sp.sympify(t.as_powers_dict().get(g, 0))
            if ex.is_Integer and ex < lo:
                lo = int(ex)
        if lo < 0:
            L *= g ** (-lo)
    cur = sp.expand(Nd * L)
    if not cur.is_polynomial(*gens):
        return None
    while cur != 0 and not (integer and E == 0):
        q, r = sp.div(cur, bd, *gens)
        if r != 0:
            break
        cur, E = q, E + 1
    coef = _expand((sp.expand(cur) / L).xreplace(back))
    return _expand(coef * b ** E) if E != 0 else coef


def _canon_base(expr, b):
    terms = sp.Add.make_args(expr)
    groups: dict = {}
    others = []
    for t in terms:
        hit = None
        for bb, ex in _factors(t):
            if bb == b and _is_nonmonomial(bb, ex):
                hit = ex
        if hit is None:
            others.append(t)
            continue
        r = hit - sp.ceiling(hit)
        groups.setdefault(r, []).append((hit, t / b ** hit))
    out = list(others)
    for r, items in groups.items():
        ms = [int(r - ex) for ex, _ in items]
        M = max(ms)
        N = _expand(sp.Add(*[rest * b ** (M - m) for (ex, rest), m in zip(items, ms)]))
        res = _reduce_group(N, b, r - M, r == 0)
        if res is None:
            out.extend(rest * b ** ex for ex, rest in items)
        else:
            out.append(res)
    return sp.Add(*out)


def _combine(expr):
    for _ in range(6):
        bases = set()
        for t in sp.Add.make_args(expr):
            for b, ex in _factors(t):
                if _is_nonmonomial(b, ex):
                    bases.add(b)
        new = expr
        for b in sorted(bases, key=sp.default_sort_key):
            new = _canon_base(new, b)
        new = sp.Add(*[_merge_exps(t) for t in sp.Add.make_args(new)])
        if new == expr:
            return new
        expr = new
    return expr


@lru_cache(maxsize=200_000)
def _normalize_cached(e):
    e = _prep(e)
    e = _expand(e)
    e = sp.Add(*[_merge_exps(t) for t in sp.Add.make_args(e)])
    return _combine(e)


def normalize(e):
    """Canonical fully-expanded form.  Idempotent."""
    e = sp.sympify(e)
    if e.is_Atom:
        return e
    return _normalize_cached(e)


fully_expand = normalize


def terms(e) -> tuple:
    e = normalize(e)
    return () if e == 0 else sp.Add.make_args(e)


def term_count(e) -> int:
    if isinstance(e, (list, tuple)):
        return sum(term_count(c) for c in e)
    return len(terms(e))


def is_zero(e) -> bool:
    n = normalize(e)
    if n == 0:
        return True
    if not n.has(sp.sin, sp.cos, sp.exp, sp.log, sp.Derivative, sp.Subs):
        if sp.cancel(sp.together(n)) == 0:
            return True
        return False
    try:
        t = sp.cancel(sp.together(n))
        if t == 0:
            return True
        if n.has(sp.sin, sp.cos):
            return normalize(sp.trigsimp(t)) == 0
    except sp.PolynomialError:
        pass
    return False


def substitute(e, mapping) -> sp.Expr:
    if isinstance(mapping, Mapping):
        mapping = list(mapping.items())
    return normalize(sp.sympify(e).xreplace(dict(mapping)))


def free_of(e, syms) -> bool:
    fs = sp.sympify(e).free_symbols
    return not any(s in fs for s in syms)


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?)|([^\W\d][\w']*)|(.))", re.UNICODE)
_FUNCS = {"ln": sp.log, "log": sp.log, "exp": sp.exp, "sin": sp.sin, "cos": sp.cos,
          "sqrt": sp.sqrt}


def _tokenize(text):
    toks = []
    pos = 0
    text = text.replace("−", "-").replace("·", "*")
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ParseError("unexpected character", pos)
        num, ident, op = m.groups()
        start = m.start(m.lastindex) if m.lastindex else pos
        if num is not None:
            if "." in num:
                raise ParseError("decimal literals are not allowed; use p/q", start)
            toks.append(("num", num, start))
        elif ident is not None:
            toks.append(("id", ident, start))
        elif op is not None:
            if op.strip():
                if op == "*" and toks and toks[-1][1] == "*" and toks[-1][0] == "op":
                    toks[-1] = ("op", "^", toks[-1][2])
                    pos = m.end()
                    continue
                if op not in "+-*/^(),;=":
                    raise ParseError(f"unexpected character {op!r}", start)
                toks.append(("op", op, start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text, sig: Signature):
        self.toks = _tokenize(text)
        self.i = 0
        self.sig = sig

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, val):
        t = self.next()
        if t[1] != val:
            raise ParseError(f"expected {val!r}, found {t[1]!r}", t[2])
        return t

    def parse(self):
        e = self.expr()
        t = self.peek()
        if t[0] != "end":
            raise ParseError(f"unexpected {t[1]!r}", t[2])
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.next()[1]
            r = self.term()
            e = e + r if op == "+" else e - r
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.next()[1]
            r = self.unary()
            if op == "/":
                if r == 0:
                    raise ParseError("division by zero", self.peek()[2])
                e = e / r
            else:
                e = e * r
        return e

    def unary(self):
        t = self.peek()
        if t[0] == "op" and t[1] in ("+", "-"):
            self.next()
            v = self.unary()
            return -v if t[1] == "-" else v
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.next()
            ex = self.unary()
            if not ex.is_Rational:
                raise ParseError("exponents must be rational constants", self.peek()[2])
            return base ** ex
        return base

    def atom(self):
        t = self.next()
        kind, val, pos = t
        if kind == "num":
            return sp.Integer(int(val))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind != "id":
            raise ParseError(f"unexpected {val!r}", pos)
        if val == "D" and self.peek()[1] == "(":
            return self.dterm()
        if val in _FUNCS and self.peek()[1] == "(":
            self.next()
            a = self.expr()
            self.expect(")")
            return _FUNCS[val](a)
        if val in self.sig.arb:
            if self.peek()[1] == "(":
                self.next()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.next()
                    args.append(self.expr())
                self.expect(")")
                return sp.Function(val)(*args)
            return self.sig.arb[val]
        return self.identifier(val, pos)

    def identifier(self, name, pos):
        sig = self.sig
        if name in sig.indep_names:
            return sig.x[sig.indep_names.index(name)]
        if name in sig.const_names:
            return sig.constants[sig.const_names.index(name)]
        dep, shadow = _dep_name(name, sig)
        if dep is not None:
            return sig.jet(dep, None, shadow)
        if "_" in name:
            head, suf = name.split("_", 1)
            dep, shadow = _dep_name(head, sig)
            if head in sig.indep_names:
                raise ParseError(f"derivative of independent variable {head}", pos)
            if dep is not None and sig._short and suf and all(c in sig.indep_names for c in suf):
                idx = [0] * sig.p
                for c in suf:
                    idx[sig.indep_names.index(c)] += 1
                return sig.jet(dep, tuple(idx), shadow)
            if head in sig.arb and suf and all(c in sig.indep_names for c in suf):
                f = sig.arb[head]
                return sp.diff(f, *[sig.x[sig.indep_names.index(c)] for c in suf])
        raise ParseError(f"unknown identifier {name!r}", pos)

    def dterm(self):
        self.expect("(")
        t = self.next()
        if t[0] != "id":
            raise ParseError("expected a name in D(...)", t[2])
        name = t[1]
        self.expect(";")
        vs = [self.next()]
        while self.peek()[1] == ",":
            self.next()
            vs.append(self.next())
        self.expect(")")
        sig = self.sig
        if name in sig.indep_names:
            raise ParseError(f"derivative of independent variable {name}", t[2])
        dep, shadow = _dep_name(name, sig)
        if dep is not None:
            idx = [0] * sig.p
            for k, v, pos in vs:
                if v not in sig.indep_names:
                    raise ParseError(f"unknown independent variable {v!r}", pos)
                idx[sig.indep_names.index(v)] += 1
            return sig.jet(dep, tuple(idx), shadow)
        if name in sig.arb:
            f = sig.arb[name]
            if all(k == "num" for k, _, _ in vs):
                # derivative with respect to formal argument slots
                dummies = [sp.Dummy(f"xi_{j + 1}") for j in range(len(f.args))]
                g = f.func(*dummies)
                for k, v, pos in vs:
                    j = int(v) - 1
                    if not 0 <= j < len(dummies):
                        raise ParseError("argument slot out of range", pos)
                    g = sp.diff(g, dummies[j])
                return g.subs(dict(zip(dummies, f.args)))
            out = f
            for k, v, pos in vs:
                if v not in sig.indep_names:
                    raise ParseError(f"unknown independent variable {v!r}", pos)
                out = sp.diff(out, sig.x[sig.indep_names.index(v)])
            return out
        raise ParseError(f"unknown identifier {name!r}", t[2])


def _dep_name(name, sig):
    if name in sig.dep_names:
        return name, False
    for d in sig.dep_names:
        if name == d.upper() and name not in sig.dep_names and name != d:
            return d, True
        if name == d + "'":
            return d, True
    return None, False


def parse(text: str, sig: Signature) -> sp.Expr:
    e = _Parser(text, sig).parse()
    return normalize(sig.apply_relations(e))


# ---------------------------------------------------------------------------
# printer

def _num(r) -> str:
    return str(r)


def to_text(e, sig: Signature) -> str:
    """Deterministic text in the grammar accepted by :func:`parse`."""
    return _Printer(sig).show(sp.sympify(e), 0)


class _Printer:
    def __init__(self, sig):
        self.sig = sig

    def show(self, e, prec):
        if e.is_Add:
            ts = sorted(e.args, key=sp.default_sort_key)
            out = ""
            for i, t in enumerate(ts):
                s = self.show(t, 10)
                if i == 0:
                    out = s
                elif s.startswith("-"):
                    out += " - " + s[1:]
                else:
                    out += " + " + s
            return f"({out})" if prec > 10 else out
        if e.is_Mul or (e.is_Pow and e.exp.is_Rational and e.exp < 0):
            return self.mul(e, prec)
        if e.is_Pow:
            return self.pow(e.base, e.exp)
        if e.is_Rational:
            s = _num(e)
            if (e.q != 1 and prec >= 20) or (e < 0 and prec > 10):
                return f"({s})"
            return s
        if e.is_Symbol:
            c = self.sig.coord(e)
            return self.sig.jet_text(c) if c else e.name
        if isinstance(e, sp.log):
            return f"ln({self.show(e.args[0], 0)})"
        if isinstance(e, (sp.exp, sp.sin, sp.cos)):
            return f"{type(e).__name__}({self.show(e.args[0], 0)})"
        if isinstance(e, AppliedUndef):
            decl = self.sig.arb.get(e.func.__name__)
            if decl is not None and decl.args == e.args:
                return e.func.__name__
            return f"{e.func.__name__}({', '.join(self.show(a, 0) for a in e.args)})"
        if isinstance(e, sp.Derivative):
            f = e.expr
            vs = [str(v) for v, k in e.variable_count for _ in range(k)]
            decl = self.sig.arb.get(f.func.__name__)
            if decl is not None and decl.args == f.args:
                if self.sig._short and all(len(v) == 1 for v in vs):
                    return f"{f.func.__name__}_{''.join(vs)}"
                return f"D({f.func.__name__}; {','.join(vs)})"
            return f"D({self.show(f, 0)}; {','.join(vs)})"
        if isinstance(e, sp.Subs):
            d = e.expr
            f = d.expr
            slots = [str(list(f.args).index(v) + 1) for v, k in d.variable_count for _ in range(k)]
            return f"D({f.func.__name__}; {','.join(slots)})"
        if e is sp.S.Pi:
            return "pi"
        return str(e)

    def pow(self, b, ex):
        bs = self.show(b, 30)
        es = _num(ex) if ex.is_Integer and ex > 0 else f"({_num(ex)})"
        return f"{bs}^{es}"

    def mul(self, e, prec):
        c, fs = e.as_coeff_mul()
        num, den = [], []
        for f in sorted(fs, key=sp.default_sort_key):
            if f.is_Pow and f.exp.is_Rational and f.exp < 0:
                den.append(f.base ** -f.exp)
            else:
                num.append(f)
        sign = "-" if c < 0 else ""
        c = abs(c)
        p, q = sp.Rational(c).p, sp.Rational(c).q
        ns = [self.show(f, 20) for f in num]
        if p != 1 or not ns:
            ns.insert(0, str(p))
        ds = [self.show(f, 30 if len(den) == 1 and q == 1 else 20) for f in den]
        if q != 1:
            ds.insert(0, str(q))
        s = "*".join(ns)
        if ds:
            s += "/" + (ds[0] if len(ds) == 1 else "(" + "*".join(ds) + ")")
        s = sign + s
        return f"({s})" if prec > 20 or (sign and prec > 10) else s
