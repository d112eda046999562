"""The (1/T)Z-graded Lie algebra of twisted modes.

Elements are finite sums of symbols c(m): c a basis vector of the model, m a
rational shift congruent to r(c)/T mod 1.  The defining relations identify
(L(-1)b)(m) with -m b(m-1), so the normal form rewrites every base against a
per-weight complement of L(-1)V, descending in weight until only complement
keys remain; vacuum symbols 1(m) survive only at m = -1.  The bracket is

    [a(m), b(n)] = sum_i C(m, i) (a_i b)(m + n - i)

followed by normalization; the degree of c(m) is wt c - m - 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .linalg import EchelonBasis, vec_axpy, vec_scale
from .reporting import check
from .scalars import rat_binomial
from .voa import GradedVector, GradingError, l_operator

ONE = Fraction(1)


@dataclass(frozen=True, order=True)
class LieTerm:
    base: tuple          # basis key of the model
    shift: Fraction      # mode m, in r(base)/T + Z

    def __repr__(self):
        return f"{self.base or '1'}({self.shift})"


class LieElement:
    """Normal-form linear combination of LieTerms."""

    __slots__ = ("spec", "terms")

    def __init__(self, spec, terms=None):
        self.spec = spec
        self.terms = {t: Fraction(c) for t, c in (terms or {}).items() if c}

    def is_zero(self):
        return not self.terms

    def __add__(self, other):
        out = dict(self.terms)
        vec_axpy(out, ONE, other.terms)
        return LieElement(self.spec, out)

    def __sub__(self, other):
        out = dict(self.terms)
        vec_axpy(out, -ONE, other.terms)
        return LieElement(self.spec, out)

    def scale(self, c):
        return LieElement(self.spec, vec_scale(self.terms, Fraction(c)))

    def __eq__(self, other):
        return (isinstance(other, LieElement) and self.spec is other.spec
                and self.terms == other.terms)

    def __repr__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"{c}*{t}" for t, c in sorted(
            self.terms.items(), key=lambda kv: (kv[0].shift, kv[0].base)))


def term_degree(spec, term: LieTerm) -> Fraction:
    return Fraction(spec.key_weight(term.base)) - term.shift - 1


class LieContext:
    """Per-model data: augmented echelon of L(-1)V per weight with preimages.

    ``split(w, terms)`` writes a weight-w vector as c + L(-1)b with c in the
    chosen complement (non-pivot keys); the preimage b is exact because the
    echelon rows carry their preimages through every elimination.  The models
    shipped here have ker L(-1) = Q·vacuum only; this is checked at build.
    """

    def __init__(self, spec):
        self.spec = spec
        self.image: dict[int, EchelonBasis] = {}
        self.complement: dict[int, list] = {}
        for w in range(0, spec.cutoff + 1):
            ech = EchelonBasis(spec.key_rank)
            if w >= 1:
                for key in spec.basis(w - 1):
                    img = l_operator(-1, GradedVector(spec, {key: ONE}))
                    piv = ech.insert(dict(img.terms), tag={key: ONE})
                    if piv is None and (w - 1 > 0 or key != ()):
                        raise GradingError(
                            "L(-1) has unexpected kernel at weight "
                            f"{w - 1}; the Lie normal form assumes ker L(-1) "
                            "is spanned by the vacuum")
            self.image[w] = ech
            self.complement[w] = [k for k in spec.basis(w) if k not in ech.rows]

    def split(self, w: int, terms: dict):
        """terms = residual + L(-1)(preimage); returns (residual, preimage)."""
        ech = self.image[w]
        residual, used = ech.reduce_tracked(terms)
        pre: dict = {}
        for piv, c in used.items():
            vec_axpy(pre, c, ech.tags[piv])
        return residual, pre


def _context(spec) -> LieContext:
    ctx = getattr(spec, "_lie_context", None)
    if ctx is None:
        ctx = LieContext(spec)
        spec._lie_context = ctx
    return ctx


def normalize(a: GradedVector, m) -> LieElement:
    """Normal form of the symbol a(m), rewriting (L(-1)b)(m) -> -m b(m-1)."""
    spec = a.spec
    m = Fraction(m)
    out: dict = {}
    stack = [(dict(a.terms), m)]
    while stack:
        terms, shift = stack.pop()
        by_w: dict[int, dict] = {}
        for key, c in terms.items():
            r = spec.key_gexp(key)
            if (shift - Fraction(r, spec.T)).denominator != 1:
                raise GradingError(
                    f"shift {shift} is not admissible for twist charge {r}")
            by_w.setdefault(spec.key_weight(key), {})[key] = c
        ctx = _context(spec)
        for w, part in by_w.items():
            residual, pre = ctx.split(w, part)
            for key, c in residual.items():
                if key == () and shift != -1:
                    continue
                t = LieTerm(key, shift)
                nc = out.get(t, Fraction(0)) + c
                if nc == 0:
                    out.pop(t, None)
                else:
                    out[t] = nc
            if pre and shift != 0:
                stack.append((vec_scale(pre, -shift), shift - 1))
    return LieElement(spec, out)


def degree(x: LieElement):
    """Common degree of a homogeneous element, or None when mixed (0 is mixed-free)."""
    degs = {term_degree(x.spec, t) for t in x.terms}
    if not degs:
        return Fraction(0)
    if len(degs) == 1:
        return degs.pop()
    return None


def triangular_part(x: LieElement):
    """'+', '0' or '-' for a degree-homogeneous element, else 'mixed'."""
    d = degree(x)
    if d is None:
        return "mixed"
    if d > 0:
        return "+"
    if d < 0:
        return "-"
    return "0"


def bracket(x: LieElement, y: LieElement) -> LieElement:
    """Bilinear extension of [a(m), b(n)] = sum_i C(m,i) (a_i b)(m+n-i)."""
    spec = x.spec
    out = LieElement(spec, {})
    for tx, cx in x.terms.items():
        wa = spec.key_weight(tx.base)
        for ty, cy in y.terms.items():
            wb = spec.key_weight(ty.base)
            for i in range(0, wa + wb):
                coeff = rat_binomial(tx.shift, i)
                if coeff == 0:
                    continue
                prod = spec.element_mode({tx.base: ONE}, i, {ty.base: ONE})
                if prod:
                    out = out + normalize(
                        GradedVector(spec, prod),
                        tx.shift + ty.shift - i).scale(cx * cy * coeff)
    return out


def o_map(a: GradedVector) -> LieElement:
    """a(wt a - 1) for homogeneous untwisted a: the degree-zero slot."""
    if a.is_zero():
        return LieElement(a.spec, {})
    if not a.is_weight_homogeneous():
        raise GradingError("o_map needs a weight-homogeneous argument")
    if a.gexp() != 0:
        raise GradingError("o_map is defined on the twist-invariant part only")
    return normalize(a, a.max_weight() - 1)


def lie_term(spec, key, shift) -> LieElement:
    return LieElement(spec, {LieTerm(key, Fraction(shift)): ONE})


def check_epimorphism(spec, algebra, max_weight: int = 4,
                      min_pairs: int = 20) -> dict:
    """Degree-zero brackets match commutators in the twisted Zhu quotient.

    For untwisted homogeneous a, b the class of [o(a), o(b)] must equal
    [a]*[b] - [b]*[a]; both sides are computed independently (bracket plus
    normal form on one side, star products plus echelon reduction on the
    other).
    """
    from .zhu import star_product

    def class_of_lie(elem: LieElement):
        out = None
        for t, c in elem.terms.items():
            if term_degree(spec, t) != 0:
                return "nonzero-degree"
            coords = algebra.class_coords(
                GradedVector(spec, {t.base: c}))
            if coords is None:
                return None
            out = coords if out is None else [a + b for a, b in zip(out, coords)]
        return out if out is not None else [Fraction(0)] * algebra.dim

    sum_bound = max_weight + 2
    keys = [k for w in range(0, max_weight + 2) for k in spec.basis(w)
            if spec.key_gexp(k) == 0]
    while True:
        pairs = [(ka, kb) for ka in keys for kb in keys
                 if spec.key_weight(ka) + spec.key_weight(kb) <= sum_bound]
        if len(pairs) >= min_pairs or sum_bound >= spec.cutoff - 2:
            break
        sum_bound += 1
    bad = []
    tested = 0
    for ka, kb in pairs:
        a = GradedVector(spec, {ka: ONE})
        b = GradedVector(spec, {kb: ONE})
        br = bracket(o_map(a), o_map(b))
        lhs = class_of_lie(br)
        comm = star_product(a, b) - star_product(b, a)
        rhs = algebra.class_coords(comm)
        if lhs is None or rhs is None or lhs == "nonzero-degree":
            continue
        tested += 1
        if lhs != rhs:
            bad.append((ka, kb))
    ok = not bad and tested >= min_pairs
    return check("lie.epimorphism",
                 "degree-zero mode brackets surject onto quotient commutators",
                 ok, tested=tested, required=min_pairs, failures=bad[:10])
