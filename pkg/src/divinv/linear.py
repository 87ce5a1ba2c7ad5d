"""Inversion of divergences that are linear in the jet variables."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import sympy as sp
from sympy.core.function import AppliedUndef

from .errors import NotDivergence, NotLinear, OptimizationExhausted
from .expr import JetCoordinate, Signature, is_zero, normalize, term_count, terms
from .jet import is_divergence, total_derivative
from .rank import Ranking


def _jet_degree(t, sig):
    syms = sig.jet_symbols(t)
    if not syms:
        return 0
    if not t.is_polynomial(*syms):
        return None
    return sp.Poly(t, *syms).total_degree()


def split_linear(C, sig: Signature):
    """(C_linear, C_rest): terms of degree exactly one in the jets."""
    lin, rest = [], []
    for t in terms(C):
        syms = sig.jet_symbols(t)
        d = _jet_degree(t, sig)
        if d == 1 and len(syms) == 1:
            s = next(iter(syms))
            if sp.diff(t, s).has(s) is False:
                lin.append(t)
                continue
        rest.append(t)
    return normalize(sp.Add(*lin)), normalize(sp.Add(*rest))


@dataclass
class ParamGroup:
    """Weights over ``slots`` for one split: params then 1 - sum(params)."""

    slots: tuple
    params: tuple

    @property
    def weights(self):
        return list(self.params) + [1 - sum(self.params)]

    def vertex(self, j):
        """Assignment that puts the whole weight on slots[j]."""
        vals = [0] * len(self.params)
        if j < len(self.params):
            vals[j] = 1
        return dict(zip(self.params, vals))

    def uniform(self):
        n = len(self.slots)
        return {p: sp.Rational(1, n) for p in self.params}


@dataclass
class LinearInversion:
    components: list                  # final components after optimization
    parametric: list                  # components with free parameters
    remainder: sp.Expr                # remainder when the search stopped
    groups: list                      # ParamGroup list
    assignment: dict                  # chosen parameter values
    stop_order: int | None            # order of the remainder when it vanished for some choice
    candidates: list = field(default_factory=list)  # (assignment, term count)
    log: list = field(default_factory=list)

    @property
    def term_count(self):
        return term_count(self.components)


class _Counter:
    def __init__(self):
        self.n = 0

    def fresh(self):
        self.n += 1
        return sp.Symbol(f"lambda{self.n}")


def _by_jet(C, sig, params):
    """{jet: coefficient} with parameter polynomials kept inside."""
    out = {}
    for t in terms(C):
        syms = sig.jet_symbols(t)
        if len(syms) != 1:
            raise NotLinear(f"term {t} is not linear in the jets")
        s = next(iter(syms))
        c = t / s
        if c.has(s):
            raise NotLinear(f"term {t} is not linear in the jets")
        j = sig.coord(s)
        out[j] = out.get(j, 0) + c
    return {j: normalize(c) for j, c in out.items() if normalize(c) != 0}


def _pieces(f, params):
    """Split coefficient f into pieces sharing the same parameter-free part."""
    out = {}
    for t in terms(f):
        pf, rest = [], []
        for fac in sp.Mul.make_args(t):
            (pf if fac.free_symbols & set(params) else rest).append(fac)
        c, r = sp.Mul(*rest).as_coeff_Mul()
        out[r] = out.get(r, 0) + c * sp.Mul(*pf)
    return [normalize(r * p) for r, p in out.items()]


def _depends(f, xv):
    return xv in sp.sympify(f).free_symbols


def _linear_in(f, xv):
    f = sp.sympify(f)
    if not _depends(f, xv):
        return False
    if f.atoms(AppliedUndef) and any(xv in a.free_symbols for a in f.atoms(AppliedUndef)):
        return False
    try:
        return f.is_polynomial(xv) and sp.degree(f, xv) == 1
    except sp.PolynomialError:
        return False


def invert_linear(C, sig: Signature, ranking: Ranking | None = None, active=None,
                  check=True) -> LinearInversion:
    C = normalize(C)
    ranking = ranking or Ranking.default(sig)
    active = list(range(sig.p)) if active is None else list(active)
    if check and len(active) == sig.p and not is_divergence(C, sig):
        raise NotDivergence("linear part is not a total divergence")
    rpos = {s: ranking.indep_order.index(s) for s in active}
    comps = [sp.Integer(0)] * sig.p
    groups: list[ParamGroup] = []
    params: list = []
    counter = _Counter()
    log = []

    def order(c: JetCoordinate):
        return sum(c.index[s] for s in active)

    def place(f, j, slot_weights):
        nonlocal C
        for s, w in slot_weights:
            prev = sig.sym(j.shifted(s, -1))
            piece = normalize(w * f * prev)
            comps[s] = normalize(comps[s] + piece)
            C = normalize(C - total_derivative(piece, s, sig))

    def criteria_slot(f, j, Cterms):
        slots = [s for s in active if j.index[s] >= 1]
        if len(slots) == 1:
            return slots[0]
        by_rank = sorted(slots, key=lambda s: rpos[s])
        for s in by_rank:
            if not _depends(f, sig.x[s]):
                return s
        for s in by_rank:
            prev = sig.sym(j.shifted(s, -1))
            need = terms(total_derivative(f, s, sig) * prev)
            if need and all(t in Cterms for t in need):
                return s
        for s in by_rank:
            if _linear_in(f, sig.x[s]):
                return s
        return None

    def zeroing(rem):
        """Partial vertex assignments (fewest groups first) that zero rem."""
        found = []
        for size in range(1, len(groups) + 1):
            for gs in itertools.combinations(range(len(groups)), size):
                if any(set(gs) > set(f[0]) for f in found):
                    continue
                for verts in itertools.product(*[range(len(groups[g].slots)) for g in gs]):
                    a = {}
                    for g, v in zip(gs, verts):
                        a.update(groups[g].vertex(v))
                    if is_zero(rem.xreplace(a)):
                        found.append((gs, a))
            if found:
                break
        return [a for _, a in found]

    if C == 0:
        return LinearInversion([sp.Integer(0)] * sig.p, list(comps), C, [], {}, None)
    N = max(order(j) for j in _by_jet(C, sig, params))
    stop_order = None
    feasible = []
    while True:
        while True:
            coeffs = _by_jet(C, sig, params)
            top = [j for j in coeffs if order(j) == N]
            if not top:
                break
            # mixed derivatives first, then by ranking (highest first)
            mixed = lambda j: sum(1 for s in active if j.index[s]) > 1
            j = max(top, key=lambda j: (mixed(j), ranking.key(j)))
            f = coeffs[j]
            if N == 0 or not any(j.index[s] for s in active):
                raise NotDivergence(f"cannot integrate {f}*{sig.sym(j)}")
            Cterms = set(terms(C))
            s = criteria_slot(f, j, Cterms)
            if s is not None:
                log.append(("criteria", sig.sym(j), sig.indep_names[s]))
                place(f, j, [(s, 1)])
                continue
            leftovers = []
            for piece in _pieces(f, params):
                s = criteria_slot(piece, j, Cterms)
                if s is None:
                    leftovers.append(piece)
                else:
                    log.append(("criteria", sig.sym(j), sig.indep_names[s]))
                    place(piece, j, [(s, 1)])
            if not leftovers:
                continue
            slots = tuple(sorted((s for s in active if j.index[s]), key=lambda s: rpos[s]))
            new = tuple(counter.fresh() for _ in slots[:-1])
            params.extend(new)
            g = ParamGroup(slots, new)
            groups.append(g)
            log.append(("split", sig.sym(j), [sig.indep_names[s] for s in slots], new))
            place(sp.Add(*leftovers), j, list(zip(slots, g.weights)))
        if C == 0:
            break
        feasible = zeroing(C) if groups else []
        if feasible:
            stop_order = max(order(j) for j in _by_jet(C, sig, params))
            break
        N -= 1
        if N < 0:
            raise OptimizationExhausted("no parameter choice removes the remainder")

    remainder = C
    parametric = list(comps)
    # optimization over admissible assignments
    starts = feasible or [{}]
    candidates = []
    for base in starts:
        free = [g for g in groups if not all(p in base for p in g.params)]
        options = []
        for g in free:
            opts = [g.vertex(v) for v in range(len(g.slots))] + [g.uniform()]
            options.append(opts)
        for combo in itertools.product(*options) if options else [()]:
            a = dict(base)
            for d in combo:
                a.update(d)
            if not is_zero(remainder.xreplace(a)):
                continue
            comps_a = [normalize(c.xreplace(a)) for c in parametric]
            candidates.append((a, term_count(comps_a), comps_a))
    if not candidates:
        raise OptimizationExhausted("no admissible parameter assignment")

    def tiebreak(item):
        a, n, comps_a = item
        # prefer weight on lower-ranked slots, then earlier parameters set to 1
        weights = []
        for g in groups:
            w = [sp.sympify(sp.sympify(x).xreplace(a)) for x in g.weights]
            weights.append(tuple(-w[i] if w[i].is_number else 0 for i in range(len(w))))
        return (n, tuple(weights))

    best = min(candidates, key=tiebreak)
    uniq = []
    seen = set()
    for a, n, _ in candidates:
        k = tuple(sorted((str(p), v) for p, v in a.items()))
        if k not in seen:
            seen.add(k)
            uniq.append((a, n))
    return LinearInversion(best[2], parametric, remainder, groups, best[0], stop_order,
                           uniq, log)
