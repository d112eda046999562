"""Graded vector spaces over Q on normal-ordered oscillator monomials, and the
mode-action engine for concrete vertex operator algebra models.

A model presents V by generators: each generator x has a positive weight, an
automorphism exponent r(x) (g acts on x by e^{2 pi i r/T}), a minimal creation
depth, and a finite table of products x_i y for i >= 0.  Basis keys are
normal-ordered words of creation operators applied to the vacuum; the engine
computes u_n v for arbitrary u, v by commuting annihilators rightward and by
the coefficient identity that expresses modes of a composite x_p w through
modes of x and w.  The identity is sign-fragile, so it is not trusted as
transcribed: the invariant suite (commutator formula, translation-derivative
rule, creation axioms, grading compatibility) is the actual contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .linalg import vec_axpy, vec_scale
from .scalars import rat_binomial

ZERO = Fraction(0)
ONE = Fraction(1)


class CutoffExceededError(Exception):
    """An operation needs weights above the model's construction cutoff."""


class GradingError(Exception):
    """Inputs violate a weight or automorphism-eigenvalue grading constraint."""


class DepthError(Exception):
    """A module operation needs graded pieces beyond the built depth."""


@dataclass(frozen=True)
class Generator:
    name: str
    weight: int
    gexp: int           # automorphism exponent r in {0, ..., T-1}
    min_depth: int      # creation factors x(-k) require k >= min_depth


def neg_pow(p: int) -> int:
    """(-1)**p for any integer p (Python's ** returns float for p < 0)."""
    return 1 if p % 2 == 0 else -1


class ModeEngine:
    """Shared recursion: modes of composite elements from generator modes.

    Subclasses provide the target space (V itself, or a graded module), the
    generator-mode action on target atoms, and the mode-lattice shift used to
    split a target mode K as m + n with m in r(x)/T + Z.  On V the shift is 0
    and the recursion is the ordinary iterate expansion; on twisted modules
    the fractional shift produces the normal-ordering corrections.
    """

    def __init__(self, spec):
        self.spec = spec
        self._ckey_cache: dict = {}

    # hooks ---------------------------------------------------------------
    def m_shift(self, g: int) -> Fraction:
        raise NotImplementedError

    def gen_apply(self, g: int, mode, atom) -> dict:
        raise NotImplementedError

    def atom_degree(self, atom):
        raise NotImplementedError

    def lattice_shift(self, ckey) -> Fraction:
        """Fractional part of the allowed mode lattice of the element."""
        raise NotImplementedError

    def gen_element(self, g: int, vmode: int, wkey) -> dict:
        """x_{vmode} w computed inside V (used for the correction terms)."""
        return self.spec.gen_element(g, vmode, wkey)

    # core ----------------------------------------------------------------
    def element_on(self, terms: dict, K, target: dict) -> dict:
        """Apply the mode at K of the V-element ``terms`` to ``target``."""
        out: dict = {}
        for ckey, cc in terms.items():
            for atom, ac in target.items():
                res = self.composite_key(ckey, K, atom)
                if res:
                    vec_axpy(out, cc * ac, res)
        return out

    def composite_key(self, ckey, K, atom) -> dict:
        spec = self.spec
        if ckey == ():
            return {atom: ONE} if K == -1 else {}
        if (Fraction(K) - self.lattice_shift(ckey)).denominator != 1:
            return {}
        ck = (ckey, K, atom)
        hit = self._ckey_cache.get(ck)
        if hit is not None:
            return dict(hit)
        g, ph = ckey[0]
        w = ckey[1:]
        wt_x = spec.generators[g].weight
        wt_w = spec.key_weight(w)
        p = ph + wt_x - 1
        m = self.m_shift(g)
        n = K - m
        da = self.atom_degree(atom)
        out: dict = {}
        # sum over x_{m+p-i} ( w_{n+i} atom )
        imax = math.floor(wt_w - 1 + da - n)
        for i in range(0, imax + 1):
            coeff = neg_pow(i) * rat_binomial(p, i)
            if coeff == 0:
                continue
            inner = self.composite_key(w, n + i, atom)
            for at2, c2 in inner.items():
                res = self.gen_apply(g, m + p - i, at2)
                if res:
                    vec_axpy(out, coeff * c2, res)
        # minus (-1)^p sum over w_{p+n-i} ( x_{m+i} atom )
        imax = math.floor(wt_x - 1 + da - m)
        for i in range(0, imax + 1):
            coeff = -neg_pow(p + i) * rat_binomial(p, i)
            if coeff == 0:
                continue
            inner = self.gen_apply(g, m + i, atom)
            for at2, c2 in inner.items():
                res = self.composite_key(w, p + n - i, at2)
                if res:
                    vec_axpy(out, coeff * c2, res)
        # fractional-shift corrections: minus sum_{i>=1} C(m,i) (x_{p+i} w)_{K-i}
        if m != 0:
            i = 1
            while p + i <= wt_x + wt_w - 1:
                coeff = rat_binomial(m, i)
                if coeff != 0:
                    prod = self.gen_element(g, p + i, w)
                    if prod:
                        res = self.element_on(prod, K - i, {atom: ONE})
                        vec_axpy(out, -coeff, res)
                i += 1
        self._ckey_cache[ck] = out
        return dict(out)


class _VacuumEngine(ModeEngine):
    """Mode engine of V acting on itself.  V is an untwisted module over
    itself whatever the twist, so all mode lattices are integral here."""

    def m_shift(self, g):
        return ZERO

    def gen_apply(self, g, mode, atom):
        return self.spec.gen_element(g, int(mode), atom)

    def atom_degree(self, atom):
        return self.spec.key_weight(atom)

    def lattice_shift(self, ckey):
        return ZERO


class VoaSpec:
    """A concrete vertex operator algebra model with a finite-order twist.

    Basis keys are tuples of (generator index, depth mode) pairs sorted
    ascending, depth modes <= -min_depth; the empty tuple is the vacuum.  The
    key a(-3)a(-1) is stored ((0,-3),(0,-1)) and means a_{-3}a_{-1}|0> in
    depth-mode (physics) labelling; the vertex-operator mode of a factor
    (g, ph) is ph + wt(g) - 1.
    """

    def __init__(self, name, twist, T, central_charge, generators,
                 gen_products, conformal, cutoff):
        self.name = name
        self.twist = twist
        self.T = int(T)
        self.central_charge = Fraction(central_charge)
        self.generators = tuple(generators)
        self.cutoff = int(cutoff)
        # products x_i y as raw term dicts, one entry per ordered generator pair
        self.gen_products = {
            pair: {int(i): dict(v) for i, v in table.items() if v}
            for pair, table in gen_products.items()
        }
        self.conformal = dict(conformal)
        self._gen_cache: dict = {}
        self._basis_cache: dict = {}
        self.engine = _VacuumEngine(self)
        for pair, table in self.gen_products.items():
            gx, gy = pair
            wxy = self.generators[gx].weight + self.generators[gy].weight
            for i, terms in table.items():
                for key in terms:
                    if self.key_weight(key) != wxy - i - 1:
                        raise GradingError(
                            f"product table {pair}[{i}] has wrong weight")

    # key helpers ----------------------------------------------------------
    def key_weight(self, key) -> int:
        return -sum(ph for _, ph in key)

    def key_gexp(self, key) -> int:
        return sum(self.generators[g].gexp for g, _ in key) % self.T

    def key_rank(self, key):
        return (self.key_weight(key), key)

    def gen_key(self, g: int):
        return ((g, -self.generators[g].min_depth),)

    # basis ----------------------------------------------------------------
    def basis(self, weight: int) -> list:
        """Canonical basis keys of the given weight, deterministic order."""
        if weight < 0:
            return []
        if weight in self._basis_cache:
            return self._basis_cache[weight]
        parts = []   # (depth k, gen) usable parts
        for gi, gen in enumerate(self.generators):
            for k in range(gen.min_depth, weight + 1):
                parts.append((k, gi))
        parts.sort(reverse=True)
        keys: list = []

        def rec(remaining, start, acc):
            if remaining == 0:
                keys.append(tuple(acc))
                return
            for idx in range(start, len(parts)):
                k, gi = parts[idx]
                if k > remaining:
                    continue
                acc.append((gi, -k))
                rec(remaining - k, idx, acc)
                acc.pop()

        rec(weight, 0, [])
        keys.sort(key=self.key_rank)
        self._basis_cache[weight] = keys
        return keys

    # generator-mode machinery ----------------------------------------------
    def _insert(self, g: int, ph: int, key) -> dict:
        """Normal-order the creation factor x(ph) onto a key."""
        if not key or (ph, g) <= (key[0][1], key[0][0]):
            return {((g, ph),) + key: ONE}
        h, hp = key[0]
        rest = key[1:]
        out: dict = {}
        for k2, c2 in self._insert(g, ph, rest).items():
            vec_axpy(out, c2, self._insert(h, hp, k2))
        v = ph + self.generators[g].weight - 1
        hv = hp + self.generators[h].weight - 1
        for i, prod in self.gen_products.get((g, h), {}).items():
            coeff = rat_binomial(v, i)
            if coeff != 0:
                res = self.engine.element_on(prod, v + hv - i, {rest: ONE})
                if res:
                    vec_axpy(out, coeff, res)
        return out

    def gen_element(self, g: int, vmode: int, key) -> dict:
        """Apply the generator mode x_{vmode} (vertex labelling) to a key."""
        ck = (g, vmode, key)
        hit = self._gen_cache.get(ck)
        if hit is not None:
            return dict(hit)
        gen = self.generators[g]
        ph = vmode - (gen.weight - 1)
        if ph <= -gen.min_depth:
            out = self._insert(g, ph, key)
        elif not key:
            out = {}
        else:
            h, hp = key[0]
            rest = key[1:]
            out = {}
            for k2, c2 in self.gen_element(g, vmode, rest).items():
                vec_axpy(out, c2, self._insert(h, hp, k2))
            hv = hp + self.generators[h].weight - 1
            for i, prod in self.gen_products.get((g, h), {}).items():
                coeff = rat_binomial(vmode, i)
                if coeff != 0:
                    res = self.engine.element_on(prod, vmode + hv - i,
                                                 {rest: ONE})
                    if res:
                        vec_axpy(out, coeff, res)
        self._gen_cache[ck] = out
        return dict(out)

    # element-level mode action ---------------------------------------------
    def element_mode(self, terms_u: dict, n: int, terms_v: dict) -> dict:
        """u_n v on raw term dicts, no cutoff wall (universal model)."""
        return self.engine.element_on(terms_u, n, terms_v)

    def reduce_terms(self, terms: dict) -> dict:
        """Hook for quotient models; the universal model is already reduced."""
        return terms

    def describe(self) -> dict:
        return {
            "name": self.name,
            "twist": self.twist,
            "order": self.T,
            "central_charge": str(self.central_charge),
            "cutoff": self.cutoff,
        }


class GradedVector:
    """Exact linear combination of basis keys of a model (or quotient model)."""

    __slots__ = ("spec", "terms")

    def __init__(self, spec, terms=None):
        self.spec = spec
        self.terms = {k: Fraction(c) for k, c in (terms or {}).items() if c}

    def copy(self):
        return GradedVector(self.spec, dict(self.terms))

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        return (isinstance(other, GradedVector) and self.spec is other.spec
                and self.terms == other.terms)

    def __hash__(self):
        raise TypeError("GradedVector is not hashable")

    def __add__(self, other):
        out = dict(self.terms)
        vec_axpy(out, ONE, other.terms)
        return GradedVector(self.spec, out)

    def __sub__(self, other):
        out = dict(self.terms)
        vec_axpy(out, -ONE, other.terms)
        return GradedVector(self.spec, out)

    def scale(self, c):
        return GradedVector(self.spec, vec_scale(self.terms, Fraction(c)))

    def __repr__(self):
        if not self.terms:
            return "0"
        bits = []
        for key in sorted(self.terms, key=self.spec.key_rank):
            c = self.terms[key]
            mono = "1" if not key else "".join(
                f"{self.spec.generators[g].name}({ph})" for g, ph in key)
            bits.append(f"{c}*{mono}")
        return " + ".join(bits)

    def weights(self):
        return sorted({self.spec.key_weight(k) for k in self.terms})

    def weight_component(self, w):
        return GradedVector(self.spec, {
            k: c for k, c in self.terms.items() if self.spec.key_weight(k) == w})

    def max_weight(self):
        return max((self.spec.key_weight(k) for k in self.terms), default=0)

    def is_weight_homogeneous(self):
        return len(self.weights()) <= 1

    def gexp(self):
        """Automorphism exponent if homogeneous, else None."""
        es = {self.spec.key_gexp(k) for k in self.terms}
        if len(es) == 1:
            return es.pop()
        return None if es else 0


# ------------------------------ public operations ---------------------------

def vector(spec, terms) -> GradedVector:
    return GradedVector(spec, terms)


def basis_vector(spec, key) -> GradedVector:
    return GradedVector(spec, {key: ONE})


def vacuum(spec) -> GradedVector:
    return basis_vector(spec, ())


def enumerate_basis(spec, weight: int) -> list:
    if weight > spec.cutoff:
        raise CutoffExceededError(
            f"weight {weight} exceeds cutoff {spec.cutoff}")
    return spec.basis(weight)


def mode_apply(u: GradedVector, n: int, v: GradedVector) -> GradedVector:
    """u_n v.  Errors when the result weight would exceed the cutoff."""
    spec = u.spec
    if spec is not v.spec:
        raise GradingError("mode_apply arguments live in different models")
    wmax = u.max_weight() + v.max_weight() - n - 1
    if u.terms and v.terms and wmax > spec.cutoff:
        raise CutoffExceededError(
            f"result weight {wmax} exceeds cutoff {spec.cutoff}")
    return GradedVector(spec, spec.element_mode(u.terms, n, v.terms))


def l_operator(k: int, v: GradedVector) -> GradedVector:
    """L(k) v = (conformal vector)_{k+1} v."""
    spec = v.spec
    return GradedVector(spec, spec.element_mode(spec.conformal, k + 1, v.terms))


def g_project(v: GradedVector, r: int) -> GradedVector:
    spec = v.spec
    r = r % spec.T
    return GradedVector(spec, {
        k: c for k, c in v.terms.items() if spec.key_gexp(k) == r})


def phi_map(v: GradedVector) -> GradedVector:
    """e^{L(1)} (-1)^{L(0)} v, per homogeneous weight component."""
    spec = v.spec
    out: dict = {}
    for w in v.weights():
        comp = v.weight_component(w).scale(neg_pow(w))
        fact = ONE
        j = 0
        while not comp.is_zero():
            vec_axpy(out, fact, comp.terms)
            j += 1
            fact = fact / j
            comp = l_operator(1, comp)
    return GradedVector(spec, out)
