"""Concrete models: the rank-1 free boson with charge conjugation, the
universal Virasoro vacuum model, and its simple quotient cut out by the
radical of the contravariant form.
"""

from __future__ import annotations

from fractions import Fraction

from .linalg import EchelonBasis, vec_axpy
from .scalars import rat
from .voa import (CutoffExceededError, Generator, GradedVector, VoaSpec,
                  vacuum)

HALF = Fraction(1, 2)

MODEL_NAMES = ("heisenberg", "virasoro-universal", "virasoro-simple")
TWIST_NAMES = ("identity", "charge-conjugation")


def build_heisenberg(cutoff: int, twist: str = "identity") -> VoaSpec:
    """Rank-1 free boson: one weight-1 generator a with [a_m, a_n] = m d_{m+n,0}.

    The charge-conjugation twist a -> -a has order 2 and gives the only
    shipped model with fractional mode lattices.
    """
    if cutoff < 2:
        raise ValueError("heisenberg needs cutoff >= 2")
    if twist not in TWIST_NAMES:
        raise ValueError(f"unknown twist {twist!r}")
    conj = twist == "charge-conjugation"
    gen = Generator(name="a", weight=1, gexp=1 if conj else 0, min_depth=1)
    return VoaSpec(
        name="heisenberg",
        twist=twist,
        T=2 if conj else 1,
        central_charge=1,
        generators=[gen],
        gen_products={(0, 0): {1: {(): Fraction(1)}}},
        conformal={((0, -1), (0, -1)): HALF},
        cutoff=cutoff,
    )


def build_virasoro(c, cutoff: int) -> VoaSpec:
    """Universal Virasoro vacuum model at central charge c; keys use L-modes <= -2."""
    if cutoff < 4:
        raise ValueError("virasoro needs cutoff >= 4")
    c = rat(c)
    gen = Generator(name="L", weight=2, gexp=0, min_depth=2)
    return VoaSpec(
        name="virasoro-universal",
        twist="identity",
        T=1,
        central_charge=c,
        generators=[gen],
        gen_products={(0, 0): {
            0: {((0, -3),): Fraction(1)},
            1: {((0, -2),): Fraction(2)},
            3: {(): c / 2},
        }},
        conformal={((0, -2),): Fraction(1)},
        cutoff=cutoff,
    )


def _adjoint_vmode(spec, g: int, vmode: int) -> int:
    # contravariant adjoint x(-k) -> x(k) in depth modes
    return 2 * (spec.generators[g].weight - 1) - vmode


def shapovalov_gram(spec, weight: int):
    """Gram matrix of the contravariant form on the weight piece, basis order."""
    if weight > spec.cutoff:
        raise CutoffExceededError(f"weight {weight} exceeds cutoff {spec.cutoff}")
    keys = spec.basis(weight)

    def pair(bra_key, ket_terms) -> Fraction:
        if not bra_key:
            return ket_terms.get((), Fraction(0))
        g, ph = bra_key[0]
        v = ph + spec.generators[g].weight - 1
        lowered = {}
        for key, coeff in ket_terms.items():
            res = spec.gen_element(g, _adjoint_vmode(spec, g, v), key)
            if res:
                vec_axpy(lowered, coeff, res)
        if not lowered:
            return Fraction(0)
        return pair(bra_key[1:], lowered)

    return [[pair(a, {b: Fraction(1)}) for b in keys] for a in keys]


class QuotientSpec:
    """Quotient of a universal model by the radical of the contravariant form.

    The radical is an ideal, so every operation is computed in the parent and
    reduced afterwards; the quotient basis at each weight is the set of
    non-pivot keys of the radical echelon.
    """

    def __init__(self, parent: VoaSpec, name: str):
        self.parent = parent
        self.name = name
        self.radical = EchelonBasis(parent.key_rank)
        self.radical_dims: dict[int, int] = {0: 0}
        self._basis_cache: dict[int, list] = {}
        for w in range(1, parent.cutoff + 1):
            keys = parent.basis(w)
            gram = shapovalov_gram(parent, w)
            from .linalg import dense_kernel
            count = 0
            for null in dense_kernel(gram, len(keys)):
                vec = {k: c for k, c in zip(keys, null) if c != 0}
                if vec and self.radical.insert(vec) is not None:
                    count += 1
            self.radical_dims[w] = count
        self.conformal = self.reduce_terms(dict(parent.conformal))

    # delegated structure ---------------------------------------------------
    @property
    def T(self):
        return self.parent.T

    @property
    def twist(self):
        return self.parent.twist

    @property
    def central_charge(self):
        return self.parent.central_charge

    @property
    def generators(self):
        return self.parent.generators

    @property
    def cutoff(self):
        return self.parent.cutoff

    @property
    def engine(self):
        return self.parent.engine

    def key_weight(self, key):
        return self.parent.key_weight(key)

    def key_gexp(self, key):
        return self.parent.key_gexp(key)

    def key_rank(self, key):
        return self.parent.key_rank(key)

    def gen_key(self, g):
        return self.parent.gen_key(g)

    def reduce_terms(self, terms: dict) -> dict:
        return self.radical.reduce(terms)

    def basis(self, weight: int) -> list:
        if weight < 0:
            return []
        if weight not in self._basis_cache:
            self._basis_cache[weight] = [
                k for k in self.parent.basis(weight)
                if k not in self.radical.rows]
        return self._basis_cache[weight]

    def gen_element(self, g, vmode, key):
        out = self.parent.gen_element(g, vmode, key)
        return self.reduce_terms(out) if out else out

    def element_mode(self, terms_u, n, terms_v):
        wmax = max((self.key_weight(k) for k in terms_u), default=0) + \
            max((self.key_weight(k) for k in terms_v), default=0) - n - 1
        if terms_u and terms_v and wmax > self.cutoff:
            raise CutoffExceededError(
                f"quotient reduction unavailable above weight {self.cutoff}")
        return self.reduce_terms(self.parent.element_mode(terms_u, n, terms_v))

    def describe(self):
        d = self.parent.describe()
        d["name"] = self.name
        d["radical_dims"] = {str(w): n for w, n in sorted(self.radical_dims.items())}
        return d


def build_virasoro_simple(c, cutoff: int) -> QuotientSpec:
    """Simple Virasoro model L(c,0): universal model modulo the form radical."""
    if cutoff < 6:
        raise ValueError("virasoro-simple needs cutoff >= 6")
    return QuotientSpec(build_virasoro(c, cutoff), "virasoro-simple")


def build_model(name: str, twist: str = "identity", c=None, cutoff: int = 12):
    """Registry entry point used by the CLI."""
    if name == "heisenberg":
        return build_heisenberg(cutoff, twist)
    if name in ("virasoro-universal", "virasoro-simple"):
        if twist != "identity":
            raise ValueError(f"{name} only supports the identity twist")
        if c is None:
            raise ValueError(f"{name} requires a central charge (--c)")
        if name == "virasoro-universal":
            return build_virasoro(c, cutoff)
        return build_virasoro_simple(c, cutoff)
    raise KeyError(f"unknown model {name!r}")
