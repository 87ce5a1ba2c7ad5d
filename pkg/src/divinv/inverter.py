"""Full divergence inversion, one independent variable at a time."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import sympy as sp

from .errors import (InversionError, NoOrbitSplit, NonPolynomial, NotACurl,
                     NotAnInvolution, NotDivergence, NotInImage, NotIntegrable,
                     RankingCheckFailed, RankingExhausted)
from .expr import Signature, is_zero, normalize, term_count, terms, to_text
from .integrate import antiderivative, invert_dx_line, lambda_integral
from .jet import divergence, is_divergence, partial_euler, total_derivative
from .linear import invert_linear, split_linear
from .rank import Ranking, heuristic_rank, integrate_by_parts
from .scale import (Family, classify_scaling, partial_scale, project, shadow_shift,
                    zero_shadows)


@dataclass
class DivergenceProblem:
    sig: Signature
    C: sp.Expr
    ranking_override: tuple | None = None   # (indep_order, dep_order), slots or names
    split_linear: bool | None = None         # None: try without, then split on failure
    verify: bool = True


@dataclass
class InversionResult:
    components: list
    iterations: int
    ranking: Ranking
    trace: list = field(default_factory=list)
    tie_report: list = field(default_factory=list)
    verified: bool | None = None
    linear_pass: bool = False

    @property
    def term_counts(self):
        return [term_count(c) for c in self.components]

    @property
    def total(self):
        return sum(self.term_counts)


def _var_free_integral(t, v):
    return normalize(t * v) if v not in t.free_symbols else antiderivative(t, v)


def _strip_x_only(C, sig, slot):
    """(C without jet-free terms, component absorbing them in ``slot``)."""
    keep, drop = [], []
    for t in terms(C):
        (keep if sig.depends_on_jets(t) else drop).append(t)
    F = sum((_var_free_integral(t, sig.x[slot]) for t in drop), sp.Integer(0))
    return normalize(sp.Add(*keep)), normalize(F)


def _invert_one_slot(E, s, ranking, sig):
    """P with D_s P = E, preferring integration by parts."""
    res = integrate_by_parts(E, s, ranking, sig)
    if res.R == 0:
        return res.F
    return invert_dx_line(E, s, sig)


def _x_order(e, x, sig):
    return max((c.index[x] for c in sig.jets(e)), default=0)


def _lowest_order(B, x, ranking, sig):
    """B or its integration-by-parts remainder, whichever has lower x-order."""
    R = integrate_by_parts(B, x, ranking, sig).R
    return R if _x_order(R, x, sig) < _x_order(B, x, sig) else B


class _Run:
    """Mutable state of one inversion: the remaining divergence and components."""

    def __init__(self, C, sig, active, trace, depth=0):
        self.C = normalize(C)
        self.sig = sig
        self.active = list(active)
        self.F = [sp.Integer(0)] * sig.p
        self.iterations = 0
        self.trace = trace
        self.depth = depth
        self.linear_done = False

    def add(self, comps):
        for i, f in enumerate(comps):
            if f != 0:
                self.F[i] = normalize(self.F[i] + f)
        self.C = normalize(self.C - divergence(comps, self.sig))

    def log(self, **rec):
        rec["depth"] = self.depth
        self.trace.append(rec)

    # ------------------------------------------------------------------
    def linear_pass(self, ranking):
        lin, _ = split_linear(self.C, self.sig)
        self.linear_done = True
        if lin == 0:
            return
        res = invert_linear(lin, self.sig, ranking, self.active,
                            check=len(self.active) == self.sig.p)
        self.add(res.components)
        self.log(event="linear", components=[to_text(c, self.sig) for c in res.components],
                 assignment={str(k): str(v) for k, v in res.assignment.items()})

    def families(self, x, level):
        out = set()
        for c in self.sig.jets(self.C):
            if c.shadow:
                continue
            I = list(c.index)
            I[x] = 0
            if sum(I[s] for s in self.active) == level:
                out.add(Family(x, c.dep, tuple(I)))
        return out

    def has_x_derivatives(self, x):
        return any(c.index[x] > 0 for c in self.sig.jets(self.C))

    def run(self, ranking: Ranking):
        order = [s for s in ranking.indep_order if s in self.active]
        for x in order:
            level = 0
            maxlevel = max((sum(c.index) for c in self.sig.jets(self.C)), default=0)
            while self.C != 0 and level <= maxlevel and self.has_x_derivatives(x):
                done = set()
                while self.has_x_derivatives(x):
                    fams = [f for f in self.families(x, level) if f not in done]
                    if not fams or self.C == 0:
                        break
                    fam = min(fams, key=lambda f: ranking.key(f.base))
                    done.add(fam)
                    self.iterate(x, fam, ranking)
                level += 1
            if self.C == 0:
                return

    # ------------------------------------------------------------------
    def iterate(self, x, fam: Family, ranking: Ranking):
        sig = self.sig
        C = self.C
        cls = classify_scaling(C, fam, sig)
        shadows = []
        if cls.zero_degree_terms:
            C = shadow_shift(C, fam, cls.zero_degree_terms, sig)
            shadows = [to_text(t, sig) for t in cls.zero_degree_terms]
        E = partial_euler(C, fam.dep, fam.I, x, 0, sig)
        others = [s for s in self.active if s != x]
        P = [sp.Integer(0)] * sig.p
        if E != 0:
            if not others:
                raise NotDivergence(f"{to_text(E, sig)} left after the partial Euler operator")
            if len(others) == 1:
                try:
                    P[others[0]] = _invert_one_slot(E, others[0], ranking, sig)
                except (NotInImage, NotIntegrable) as e:
                    raise RankingCheckFailed(f"cannot invert reduced divergence: {e}")
            else:
                sub = _Run(E, sig, others, self.trace, self.depth + 1)
                sub.solve(ranking)
                P = sub.F
        base = fam.base
        bkey = ranking.key(base)
        for i in others:
            for t in terms(P[i]):
                js = sig.jets(t)
                if not js or max(ranking.key(c) for c in js) < bkey:
                    self.log(event="check-failed", x=sig.indep_names[x],
                             family=sig.jet_text(base), term=to_text(t, sig))
                    raise RankingCheckFailed(
                        f"term {to_text(t, sig)} of P^{sig.indep_names[i]} ranks below "
                        f"{sig.jet_text(base)}")
        f = [sp.Integer(0)] * sig.p
        u = sig.sym(base)
        for i in others:
            if P[i] == 0:
                continue
            B = lambda_integral(u * partial_scale(P[i], fam, sig), fam.lam)
            f[i] = _lowest_order(B, x, ranking, sig)
        K = normalize(C - sum((total_derivative(f[i], i, sig) for i in others), sp.Integer(0)))
        Q = project(K, fam, sig)
        if Q != 0:
            res = integrate_by_parts(Q, x, ranking, sig)
            if res.R == 0:
                f[x] = res.F
            else:
                try:
                    f[x] = invert_dx_line(Q, x, sig)
                except NotInImage as e:
                    raise RankingCheckFailed(f"kernel step failed: {e}")
        f = [zero_shadows(g, sig) for g in f]
        if all(g == 0 for g in f):
            return
        before = self.C
        self.add(f)
        if self.C == before:
            return
        self.iterations += 1
        self.log(event="iteration", x=sig.indep_names[x], family=sig.jet_text(base),
                 scaling=cls.kind, shadows=shadows,
                 P={sig.indep_names[i]: to_text(P[i], sig) for i in others if P[i] != 0},
                 f={sig.indep_names[i]: to_text(g, sig) for i, g in enumerate(f) if g != 0})

    def solve(self, ranking: Ranking, split=None):
        """Run to completion under one ranking; linear split on failure if allowed."""
        self.C, extra = _strip_x_only(self.C, self.sig,
                                      min(self.active, key=ranking.indep_order.index))
        if extra != 0:
            slot = min(self.active, key=ranking.indep_order.index)
            self.F[slot] = normalize(self.F[slot] + extra)
        if split:
            self.linear_pass(ranking)
        saved = (self.C, list(self.F), self.iterations)
        try:
            self.run(ranking)
        except RankingCheckFailed:
            if split is False or self.linear_done or split_linear(saved[0], self.sig)[0] == 0:
                raise
            # discard the attempt and start again from the split
            self.C, self.F, self.iterations = saved
            self.log(event="linear-split", reason="ranking check failed without it")
            self.linear_pass(ranking)
            self.run(ranking)
        if self.C != 0 and not is_zero(self.C):
            raise RankingCheckFailed(f"{to_text(self.C, self.sig)} remains after all variables")
        self.C = sp.Integer(0)


def _as_slots(order, names):
    return tuple(names.index(v) if isinstance(v, str) else v for v in order)


def candidate_rankings(C, sig: Signature, active=None):
    """Heuristic ranking first, then dependent and independent permutations."""
    io, do, ties = heuristic_rank(C, sig, active)
    act = [s for s in io if active is None or s in active]
    rest = [s for s in io if s not in act]
    seen = []

    def push(i, d):
        r = Ranking(tuple(i) + tuple(rest), tuple(d))
        if r not in seen:
            seen.append(r)

    push(act, do)
    for d in itertools.permutations(do):
        push(act, d)
    for i in itertools.permutations(act):
        for d in [do] + list(itertools.permutations(do)):
            push(i, d)
    return seen, ties


def invert_divergence(prob: DivergenceProblem) -> InversionResult:
    sig = prob.sig
    C0 = normalize(sig.apply_relations(prob.C))
    trace: list = []
    if prob.ranking_override is not None:
        io, do = prob.ranking_override
        io = _as_slots(io, sig.indep_names)
        io = io + tuple(s for s in range(sig.p) if s not in io)
        do = tuple(do) + tuple(d for d in sig.dep_names if d not in do)
        rankings, ties = [Ranking(io, do)], []
    else:
        rankings, ties = candidate_rankings(C0, sig)
    if C0 == 0:
        return InversionResult([sp.Integer(0)] * sig.p, 0, rankings[0], trace, ties, True)
    if not is_divergence(C0, sig):
        raise NotDivergence(f"{to_text(C0, sig)} fails the Euler-operator test")
    run = _Run(C0, sig, range(sig.p), trace)
    used = None
    for n, r in enumerate(rankings):
        if n:
            trace.append({"event": "re-rank", "ranking": r.describe(sig), "depth": 0})
        try:
            run.solve(r, prob.split_linear)
            used = r
            break
        except RankingCheckFailed as e:
            trace.append({"event": "ranking-failed", "ranking": r.describe(sig),
                          "reason": str(e), "depth": 0})
            continue
    if used is None:
        raise RankingExhausted("no candidate ranking completes the inversion", trace)
    comps = [normalize(c) for c in run.F]
    verified = None
    if prob.verify:
        verified = is_zero(divergence(comps, sig) - C0)
    return InversionResult(comps, run.iterations, used, trace, ties, verified, run.linear_done)


def _solve_subset(F, sig, active, ranking=None):
    """Components over the slots in ``active`` whose divergence is F."""
    F = normalize(F)
    if F == 0:
        return [sp.Integer(0)] * sig.p
    if ranking is None:
        io, do, _ = heuristic_rank(F, sig, active)
        ranking = Ranking(io, do)
    if len(active) == 1:
        out = [sp.Integer(0)] * sig.p
        out[active[0]] = _invert_one_slot(F, active[0], ranking, sig)
        return out
    run = _Run(F, sig, active, [])
    run.solve(ranking)
    return run.F


def curl(G, sig: Signature):
    Gx, Gy, Gz = G
    D = lambda f, i: total_derivative(f, i, sig)
    return [normalize(D(Gz, 1) - D(Gy, 2)), normalize(D(Gx, 2) - D(Gz, 0)),
            normalize(D(Gy, 0) - D(Gx, 1))]


def invert_curl(F, sig: Signature, rankings=None):
    """G with Curl(G) = F for p = 3, one component of H at a time."""
    if sig.p != 3:
        raise ValueError("curl inversion needs exactly three independent variables")
    F = [normalize(f) for f in F]
    rankings = rankings or {}
    try:
        P = _solve_subset(F[0], sig, [1, 2], rankings.get(0))
        Hxy, Hxz = P[1], P[2]
        rest = normalize(F[1] + total_derivative(Hxy, 0, sig))
        Hyz = _solve_subset(rest, sig, [2], rankings.get(1))[2]
    except InversionError as e:
        raise NotACurl(f"component inversion failed: {e}")
    G = [Hyz, normalize(-Hxz), Hxy]
    if not all(is_zero(a - b) for a, b in zip(curl(G, sig), F)):
        raise NotACurl("Curl(G) does not reproduce F")
    return G


def split_by_degree(C, sig: Signature):
    """Homogeneous parts of C in the jet variables, lowest degree first."""
    parts = {}
    for t in terms(C):
        syms = sorted(sig.jet_symbols(t), key=str)
        if syms and not t.is_polynomial(*syms):
            raise NonPolynomial(f"term {to_text(t, sig)} is not polynomial in the jets")
        d = sp.Poly(t, *syms).total_degree() if syms else 0
        parts[d] = parts.get(d, 0) + t
    return [normalize(parts[d]) for d in sorted(parts)]


@dataclass(frozen=True)
class Symmetry:
    """Discrete point symmetry x_i -> s_i x_{perm(i)}, u -> dep_map[u]."""

    perm: tuple        # slot -> slot
    signs: tuple       # slot -> +1 / -1
    dep_map: tuple     # pairs (u, u')

    @classmethod
    def parse(cls, spec: dict, sig: Signature) -> "Symmetry":
        """From {"x": "-x", "y": "y", "u": "v", "v": "u"}; omitted names are fixed."""
        perm, signs = list(range(sig.p)), [1] * sig.p
        for i, name in enumerate(sig.indep_names):
            target = spec.get(name, name).replace(" ", "")
            s = -1 if target.startswith("-") else 1
            target = target.lstrip("+-")
            if target not in sig.indep_names:
                raise ValueError(f"unknown variable {target}")
            perm[i], signs[i] = sig.indep_names.index(target), s
        if sorted(perm) != list(range(sig.p)):
            raise ValueError("independent-variable map is not a permutation")
        deps = tuple((d, spec.get(d, d)) for d in sig.dep_names)
        if sorted(b for _, b in deps) != sorted(sig.dep_names):
            raise ValueError("dependent-variable map is not a permutation")
        return cls(tuple(perm), tuple(signs), deps)


def apply_symmetry(e, gamma: Symmetry, sig: Signature):
    e = normalize(e)
    dmap = dict(gamma.dep_map)
    reps = {}
    for i, xv in enumerate(sig.x):
        reps[xv] = gamma.signs[i] * sig.x[gamma.perm[i]]
    for c in sig.jets(e):
        idx = [0] * sig.p
        sign = 1
        for i, k in enumerate(c.index):
            idx[gamma.perm[i]] = k
            sign *= gamma.signs[i] ** k
        reps[sig.sym(c)] = sign * sig.jet(dmap[c.dep], tuple(idx), c.shadow)
    return normalize(e.xreplace(reps))


def apply_symmetry_components(F, gamma: Symmetry, sig: Signature):
    """Components of Gamma(C) given components F of C."""
    out = [sp.Integer(0)] * sig.p
    for i, f in enumerate(F):
        out[gamma.perm[i]] = normalize(gamma.signs[i] * apply_symmetry(f, gamma, sig))
    return out


def _orbit_split(B, gamma, sig):
    """g with B = g + Gamma(g), one representative per orbit of terms."""
    ts = list(terms(B))
    remaining = dict.fromkeys(ts)
    g = []
    dep_pos = {d: i for i, d in enumerate(sig.dep_names)}

    def pref(t):
        js = sig.jets(t)
        deps = tuple(sorted((-dep_pos[c.dep] for c in js)))
        orders = tuple(-sum(c.index[i] for c in js) for i in range(sig.p))
        return (deps, orders, str(t))

    for t in ts:
        if t not in remaining:
            continue
        img = apply_symmetry(t, gamma, sig)
        if img == t:
            g.append(t / 2)
            del remaining[t]
            continue
        if img not in remaining:
            raise NoOrbitSplit(f"image of {to_text(t, sig)} is not a term of the expression")
        del remaining[t]
        del remaining[img]
        g.append(min((t, img), key=pref))
    return normalize(sp.Add(*g))


def split_by_symmetry(C, gamma: Symmetry, sig: Signature):
    """(g, valid) with C = g + Gamma(g); valid when g is itself a divergence."""
    C = normalize(C)
    if not is_zero(apply_symmetry(apply_symmetry(C, gamma, sig), gamma, sig) - C):
        raise NotAnInvolution("Gamma applied twice does not return C")
    g = None
    coeff, factors = sp.factor_list(C)
    factors = [f ** k for f, k in factors]
    inv = [f for f in factors
           if sig.depends_on_jets(f) and is_zero(apply_symmetry(f, gamma, sig) - f)]
    if len(factors) > 1:
        # split the invariant factor with the most terms, keep the rest as a multiplier
        for Bf in sorted(inv, key=lambda f: (-len(terms(normalize(f))), str(f))):
            A = sp.Mul(*[f for f in inv if f is not Bf])
            B = normalize(C / A)
            try:
                b = _orbit_split(B, gamma, sig)
            except NoOrbitSplit:
                continue
            g = normalize(A * b)
            break
    if g is None:
        g = _orbit_split(C, gamma, sig)
    if not is_zero(g + apply_symmetry(g, gamma, sig) - C):
        raise NoOrbitSplit("representatives do not reassemble the expression")
    return g, is_divergence(g, sig)


@dataclass
class ComponentComparison:
    same_divergence: bool
    term_difference: int
    constant_difference: bool | None


def compare_components(A, B, sig: Signature) -> ComponentComparison:
    same = is_zero(divergence(A, sig) - divergence(B, sig))
    diff = term_count(list(A)) - term_count(list(B))
    const = None
    if sig.p == 1:
        const = not sig.depends_on_jets(normalize(A[0] - B[0])) and \
            not normalize(A[0] - B[0]).has(sig.x[0])
    return ComponentComparison(same, diff, const)


@dataclass
class SplitInversion:
    components: list
    parts: list = field(default_factory=list)   # (label, part, components)
    iterations: int = 0
    verified: bool | None = None

    @property
    def total(self):
        return term_count(list(self.components))


def invert_with_symmetries(prob: DivergenceProblem, symmetries=()) -> SplitInversion:
    """Split by degree, then by each valid symmetry, and invert the pieces.

    A piece g with part = g + Gamma(g) is inverted once; the components of
    Gamma(g) follow from :func:`apply_symmetry_components`.
    """
    sig = prob.sig
    C = normalize(sig.apply_relations(prob.C))
    try:
        parts = split_by_degree(C, sig)
    except NonPolynomial:
        parts = [C]
    out = SplitInversion([sp.Integer(0)] * sig.p)

    def solve(part, label):
        for name, gamma in symmetries:
            try:
                g, valid = split_by_symmetry(part, gamma, sig)
            except (NotAnInvolution, NoOrbitSplit):
                continue
            if not valid or term_count(g) >= term_count(part):
                out.parts.append((f"{label}/{name} rejected", g, None))
                continue
            comps = solve(g, f"{label}/{name}")
            return [normalize(a + b) for a, b in
                    zip(comps, apply_symmetry_components(comps, gamma, sig))]
        r = invert_divergence(DivergenceProblem(sig, part, prob.ranking_override,
                                                prob.split_linear, verify=False))
        out.iterations += r.iterations
        out.parts.append((label, part, r.components))
        return r.components

    for k, part in enumerate(parts):
        comps = solve(part, f"degree-part {k}")
        out.components = [normalize(a + b) for a, b in zip(out.components, comps)]
    if prob.verify:
        out.verified = is_zero(divergence(out.components, sig) - C)
    return out
