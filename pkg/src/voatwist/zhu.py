"""The twisted Zhu algebra of a model: residue products, the relation span,
the echelon quotient with its multiplication table, and structural checks
(identity and centrality laws, associativity, the weight-lowering
anti-automorphism, semisimplicity via the trace form).

The relation subspace has an infinite spanning family; we generate the
members with wt u + wt v <= N + K and auxiliary exponent m <= K, and define
the computed quotient as the span of keys of weight <= N modulo the generated
relations.  Equality of the quotient dimension across margins K-1 and K is a
stabilization heuristic, reported as such, never a proof.
"""

from __future__ import annotations

from fractions import Fraction

import sympy

from .linalg import EchelonBasis, dense_kernel, vec_axpy
from .reporting import check
from .scalars import rat_binomial
from .voa import (CutoffExceededError, GradedVector, GradingError, neg_pow,
                  phi_map, vacuum)

ONE = Fraction(1)


def _delta(r: int) -> int:
    return 1 if r == 0 else 0


def circ_product(u: GradedVector, v: GradedVector) -> GradedVector:
    """Res_z (1+z)^{wt u - 1 + d_r + r/T} z^{-1-d_r} Y(u,z)v for homogeneous u."""
    spec = u.spec
    if u.is_zero():
        return GradedVector(spec, {})
    if not u.is_weight_homogeneous() or u.gexp() is None:
        raise GradingError("circ_product needs u homogeneous in weight and twist")
    r = u.gexp()
    wt = u.max_weight()
    d = _delta(r)
    top = wt + v.max_weight() + d
    if v.terms and top > spec.cutoff:
        raise CutoffExceededError(f"circ product reaches weight {top}")
    expo = Fraction(wt - 1 + d) + Fraction(r, spec.T)
    out: dict = {}
    for i in range(0, wt + v.max_weight() + d + 1):
        coeff = rat_binomial(expo, i)
        if coeff != 0:
            res = spec.element_mode(u.terms, i - 1 - d, v.terms)
            if res:
                vec_axpy(out, coeff, res)
    return GradedVector(spec, out)


def star_product(u: GradedVector, v: GradedVector) -> GradedVector:
    """u *_g v: zero on twist-charged u, else sum_i C(wt u, i) u_{i-1} v.

    Extended linearly over the weight and twist decompositions of u.
    """
    spec = u.spec
    out: dict = {}
    top = u.max_weight() + v.max_weight()
    if u.terms and v.terms and top > spec.cutoff:
        raise CutoffExceededError(f"star product reaches weight {top}")
    by_weight: dict = {}
    for key, c in u.terms.items():
        if spec.key_gexp(key) != 0:
            continue
        by_weight.setdefault(spec.key_weight(key), {})[key] = c
    for wt, terms in by_weight.items():
        for i in range(0, wt + 1):
            coeff = rat_binomial(wt, i)
            res = spec.element_mode(terms, i - 1, v.terms)
            if res:
                vec_axpy(out, coeff, res)
    return GradedVector(spec, out)


def _member(spec, ukey, vkey, m: int, n: int) -> dict:
    """Res_z (1+z)^{wt u - 1 + d_r + r/T + n} z^{-m-d_r-1} Y(u,z)v, raw terms."""
    r = spec.key_gexp(ukey)
    d = _delta(r)
    wu = spec.key_weight(ukey)
    wv = spec.key_weight(vkey)
    expo = Fraction(wu - 1 + d + n) + Fraction(r, spec.T)
    out: dict = {}
    for i in range(0, wu + wv + m + d + 1):
        coeff = rat_binomial(expo, i)
        if coeff != 0:
            res = spec.element_mode({ukey: ONE}, i - m - d - 1, {vkey: ONE})
            if res:
                vec_axpy(out, coeff, res)
    return out


def iter_spanning(spec, N: int, K: int, margin_lo: int = 0):
    """Yield ((ukey, vkey, m, n), terms) for margin layers margin_lo..K.

    Layer 0 holds all pairs with wt u + wt v <= N at m = n = 0 (the plain
    circle products); layer k >= 1 adds the pairs with wt u + wt v = N + k
    for all m <= k plus the earlier pairs at exactly m = k.  Members whose
    expansion would climb above the model cutoff are skipped; dropping a
    relation is sound (the quotient can only get bigger, never wrong).
    """
    for k in range(margin_lo, K + 1):
        for s in range(0, N + k + 1):
            if k == 0:
                ms = [0]
            elif s == N + k:
                ms = list(range(0, k + 1))
            else:
                ms = [k]
            for wu in range(0, s + 1):
                for ukey in spec.basis(wu):
                    du = _delta(spec.key_gexp(ukey))
                    for vkey in spec.basis(s - wu):
                        for m in ms:
                            if s + m + du > spec.cutoff:
                                continue
                            for n in range(0, m + 1):
                                yield (ukey, vkey, m, n), _member(
                                    spec, ukey, vkey, m, n)


def spanning_family(spec, N: int, K: int):
    """All generated relation vectors for (N, K), as GradedVectors."""
    if K < 0:
        raise ValueError("margin must be >= 0")
    if N + K > spec.cutoff:
        raise CutoffExceededError(f"N + K = {N + K} exceeds cutoff {spec.cutoff}")
    return [GradedVector(spec, t) for _, t in iter_spanning(spec, N, K)]


class ZhuAlgebra:
    """Echelon presentation of V modulo the generated relation span at cutoff N."""

    def __init__(self, spec, N, K, ech, dims_by_margin, family_count,
                 generation_truncated):
        self.spec = spec
        self.N = N
        self.K = K
        self.ech = ech
        self.dims_by_margin = dims_by_margin
        self.family_count = family_count
        self.generation_truncated = generation_truncated
        self.basis_keys = [k for w in range(N + 1) for k in spec.basis(w)
                           if k not in ech.rows]
        self.basis_keys.sort(key=spec.key_rank)
        self.index = {k: i for i, k in enumerate(self.basis_keys)}
        self.dim = len(self.basis_keys)
        # stable across the last two margins AND across the last T weights of
        # the window; a class appearing at the top of the window means the
        # dimension is still growing with N (polynomial algebras never settle)
        self.margin_stable = (K >= 1
                              and dims_by_margin[K] == dims_by_margin[K - 1])
        top = max((spec.key_weight(k) for k in self.basis_keys), default=0)
        self.window_stable = top <= N - spec.T
        self.stabilized = self.margin_stable and self.window_stable
        self.identity = self.class_coords(vacuum(spec))
        self.omega = self.class_coords(GradedVector(spec, spec.conformal))
        self.table: dict = {}
        for i, ki in enumerate(self.basis_keys):
            for j, kj in enumerate(self.basis_keys):
                try:
                    prod = star_product(GradedVector(spec, {ki: ONE}),
                                        GradedVector(spec, {kj: ONE}))
                except CutoffExceededError:
                    self.table[(i, j)] = None
                    continue
                self.table[(i, j)] = self.class_coords(prod)

    def reduce(self, v: GradedVector) -> GradedVector:
        return GradedVector(self.spec, self.ech.reduce(v.terms))

    def class_coords(self, v: GradedVector):
        """Coordinates of [v] in the quotient basis, or None if not closed."""
        red = self.ech.reduce(v.terms)
        coords = [Fraction(0)] * self.dim
        for key, c in red.items():
            i = self.index.get(key)
            if i is None:
                return None
            coords[i] = c
        return coords

    def left_mult_matrix(self, coords):
        """Matrix of left multiplication by the class with given coordinates."""
        n = self.dim
        mat = [[Fraction(0)] * n for _ in range(n)]
        for i, ci in enumerate(coords):
            if ci == 0:
                continue
            for j in range(n):
                col = self.table[(i, j)]
                if col is None:
                    return None
                for k in range(n):
                    mat[k][j] += ci * col[k]
        return mat

    def closed(self) -> bool:
        return all(v is not None for v in self.table.values())

    def summary(self) -> dict:
        return {
            "dim": self.dim,
            "basis": [self._key_name(k) for k in self.basis_keys],
            "identity": self.identity,
            "omega": self.omega,
            "stabilized": self.stabilized,
            "margin_stable": self.margin_stable,
            "window_stable": self.window_stable,
            "dims_by_margin": self.dims_by_margin,
            "family_count": self.family_count,
            "generation_truncated": self.generation_truncated,
            "table_closed": self.closed(),
        }

    def _key_name(self, key) -> str:
        if not key:
            return "1"
        return "".join(f"{self.spec.generators[g].name}({p})" for g, p in key)


def build_quotient(spec, N: int, K: int) -> ZhuAlgebra:
    """Echelon-reduce the spanning family and assemble the quotient algebra."""
    if K < 1:
        raise ValueError("margin must be >= 1 for stabilization reporting")
    if N + K > spec.cutoff:
        raise CutoffExceededError(f"N + K = {N + K} exceeds cutoff {spec.cutoff}")
    total_keys = sum(len(spec.basis(w)) for w in range(N + 1))
    ech = EchelonBasis(spec.key_rank)
    dims = []
    count = 0
    truncated = N + 2 * K + 1 > spec.cutoff
    for k in range(0, K + 1):
        for _desc, terms in iter_spanning(spec, N, k, margin_lo=k):
            count += 1
            if terms:
                ech.insert(terms)
        low_pivots = sum(1 for p in ech.rows if spec.key_weight(p) <= N)
        dims.append(total_keys - low_pivots)
    return ZhuAlgebra(spec, N, K, ech, dims, count, truncated)


def check_ideal(spec, algebra: ZhuAlgebra, max_samples: int = 60) -> dict:
    """Products of quotient classes with generated relation vectors reduce to 0."""
    failures = []
    tested = 0
    for desc, terms in iter_spanning(spec, algebra.N, algebra.K):
        if tested >= max_samples:
            break
        u = GradedVector(spec, terms)
        if u.is_zero():
            continue
        for key in algebra.basis_keys:
            c = GradedVector(spec, {key: ONE})
            if c.max_weight() + u.max_weight() > spec.cutoff:
                continue
            tested += 1
            left = algebra.reduce(star_product(c, u))
            right = algebra.reduce(star_product(u, c))
            if not left.is_zero():
                failures.append(("left", algebra._key_name(key), desc))
            if not right.is_zero():
                failures.append(("right", algebra._key_name(key), desc))
    return check(
        "zhu.ideal", "relation span is a two-sided ideal for the star product",
        not failures, tested=tested, failures=failures[:10])


def check_associativity(algebra: ZhuAlgebra) -> dict:
    """([x]*[y])*[z] = [x]*([y]*[z]) over the closed multiplication table."""
    n = algebra.dim
    bad = []
    tested = 0
    skipped = 0

    def mul(a, b):
        out = [Fraction(0)] * n
        for i, ca in enumerate(a):
            if ca == 0:
                continue
            for j, cb in enumerate(b):
                if cb == 0:
                    continue
                col = algebra.table[(i, j)]
                if col is None:
                    return None
                for k in range(n):
                    out[k] += ca * cb * col[k]
        return out

    basis = [[ONE if i == j else Fraction(0) for j in range(n)]
             for i in range(n)]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                ab = mul(basis[i], basis[j])
                bc = mul(basis[j], basis[k])
                if ab is None or bc is None:
                    skipped += 1
                    continue
                lhs = mul(ab, basis[k])
                rhs = mul(basis[i], bc)
                if lhs is None or rhs is None:
                    skipped += 1
                    continue
                tested += 1
                if lhs != rhs:
                    bad.append((i, j, k))
    return check("zhu.associativity",
                 "the star product is associative on the quotient basis",
                 not bad, tested=tested, skipped=skipped, failures=bad[:10])


def check_identity_laws(algebra: ZhuAlgebra) -> dict:
    """[1] is a two-sided identity and [omega] is central in the table."""
    spec = algebra.spec
    bad = []
    one = vacuum(spec)
    om = GradedVector(spec, spec.conformal)
    for key in algebra.basis_keys:
        x = GradedVector(spec, {key: ONE})
        if not algebra.reduce(star_product(one, x) - x).is_zero():
            bad.append(("1*x", algebra._key_name(key)))
        if not algebra.reduce(star_product(x, one) - x).is_zero():
            bad.append(("x*1", algebra._key_name(key)))
        if spec.key_weight(key) + om.max_weight() <= spec.cutoff:
            comm = star_product(om, x) - star_product(x, om)
            if not algebra.reduce(comm).is_zero():
                bad.append(("omega", algebra._key_name(key)))
    return check("zhu.identity",
                 "vacuum class is the identity; conformal class is central",
                 not bad, failures=bad[:10])


def check_phi(spec_g, alg_g: ZhuAlgebra, spec_ginv, alg_ginv: ZhuAlgebra,
              raw_samples: int = 40) -> dict:
    """The map e^{L(1)}(-1)^{L(0)} reverses products between the two quotients."""
    bad = []
    # span containment: every echelon row of the source relation span lands in
    # the target span (rows span exactly the generated family)
    for pivot, row in alg_g.ech.rows.items():
        img = phi_map(GradedVector(spec_g, row))
        img = GradedVector(spec_ginv, img.terms)
        if alg_ginv.ech.reduce(img.terms):
            bad.append(("row", spec_g.key_weight(pivot)))
    # plus a sample of raw family members, for good measure
    seen = 0
    for desc, terms in iter_spanning(spec_g, alg_g.N, alg_g.K):
        if seen >= raw_samples:
            break
        seen += 1
        img = phi_map(GradedVector(spec_g, terms))
        if alg_ginv.ech.reduce(img.terms):
            bad.append(("member", desc))
    # anti-morphism on quotient-basis pairs
    tested = 0
    for ki in alg_g.basis_keys:
        for kj in alg_g.basis_keys:
            a = GradedVector(spec_g, {ki: ONE})
            b = GradedVector(spec_g, {kj: ONE})
            if a.max_weight() + b.max_weight() > spec_g.cutoff:
                continue
            tested += 1
            lhs = phi_map(star_product(a, b))
            lhs = alg_ginv.reduce(GradedVector(spec_ginv, lhs.terms))
            fa = GradedVector(spec_ginv, phi_map(a).terms)
            fb = GradedVector(spec_ginv, phi_map(b).terms)
            rhs = alg_ginv.reduce(star_product(fb, fa))
            if not (lhs - rhs).is_zero():
                bad.append(("pair", alg_g._key_name(ki), alg_g._key_name(kj)))
    return check("zhu.phi",
                 "e^{L(1)}(-1)^{L(0)} maps the relation span into the inverse-"
                 "twist span and reverses products on classes",
                 not bad, pairs_tested=tested, failures=bad[:10])


def _minimal_polynomial(mat):
    """Monic minimal polynomial of a rational matrix, low to high coefficients."""
    n = len(mat)
    flat_rank = EchelonBasis(lambda k: k)
    powers = []
    cur = [[ONE if i == j else Fraction(0) for j in range(n)] for i in range(n)]
    while True:
        flat = {i * n + j: cur[i][j] for i in range(n) for j in range(n)
                if cur[i][j] != 0}
        powers.append(flat)
        if flat_rank.insert(dict(flat)) is None:
            break
        nxt = [[sum((cur[i][k] * mat[k][j] for k in range(n)), Fraction(0))
                for j in range(n)] for i in range(n)]
        cur = nxt
    d = len(powers) - 1
    cols = list({k for p in powers for k in p})
    rows = [[powers[j].get(c, Fraction(0)) for j in range(d)] for c in cols]
    rhs = [powers[d].get(c, Fraction(0)) for c in cols]
    aug = [row + [rhs[i]] for i, row in enumerate(rows)]
    sol = _solve_overdetermined(aug, d)
    return [-s for s in sol] + [ONE]


def _solve_overdetermined(aug, nvars):
    m = [list(r) for r in aug]
    rank = 0
    piv_cols = []
    for col in range(nvars):
        piv = None
        for r in range(rank, len(m)):
            if m[r][col] != 0:
                piv = r
                break
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        pv = m[rank][col]
        m[rank] = [x / pv for x in m[rank]]
        for r in range(len(m)):
            if r != rank and m[r][col] != 0:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        piv_cols.append(col)
        rank += 1
    sol = [Fraction(0)] * nvars
    for r, col in enumerate(piv_cols):
        sol[col] = m[r][nvars]
    return sol


def _factor_spectrum(coeffs):
    """Exact rational roots of a monic rational polynomial, plus any
    irreducible non-linear factors (factored over Q)."""
    x = sympy.Symbol("x")
    poly = sum(sympy.Rational(c.numerator, c.denominator) * x**i
               for i, c in enumerate(coeffs))
    roots = []
    residual = []
    for factor, mult in sympy.factor_list(sympy.Poly(poly, x))[1]:
        if factor.degree() == 1:
            r = sympy.Rational(-factor.nth(0), factor.nth(1))
            roots.append(Fraction(int(r.p), int(r.q)))
        else:
            residual.append(str(factor.as_expr()))
    roots.sort()
    return roots, residual


def semisimplicity_report(algebra: ZhuAlgebra) -> dict:
    """Trace-form radical of the finite quotient and the conformal spectrum.

    Refuses (skipped status) when the dimension did not stabilize across the
    last two margins, since the computed quotient is then only an upper bound.
    """
    if not algebra.stabilized:
        return check(
            "zhu.semisimplicity",
            "trace form of left multiplication is nondegenerate",
            None, reason="quotient dimension did not stabilize; the computed "
            "quotient is only an upper bound at this truncation",
            dims_by_margin=algebra.dims_by_margin,
            margin_stable=algebra.margin_stable,
            window_stable=algebra.window_stable)
    if not algebra.closed():
        return check(
            "zhu.semisimplicity",
            "trace form of left multiplication is nondegenerate",
            None, reason="multiplication table has unclosed entries")
    n = algebra.dim
    mats = []
    for i in range(n):
        coords = [ONE if j == i else Fraction(0) for j in range(n)]
        mats.append(algebra.left_mult_matrix(coords))
    trace_form = [[sum((sum(mats[i][a][b] * mats[j][b][a] for b in range(n))
                        for a in range(n)), Fraction(0))
                   for j in range(n)] for i in range(n)]
    radical = dense_kernel(trace_form, n) if n else []
    data = {"dim": n, "radical_dim": len(radical)}
    ok = True
    if not radical and n:
        lom = algebra.left_mult_matrix(algebra.omega)
        minpoly = _minimal_polynomial(lom)
        spectrum, residual = _factor_spectrum(minpoly)
        data["omega_spectrum"] = spectrum
        data["omega_minpoly"] = minpoly
        if residual:
            data["irreducible_factors"] = residual
    return check("zhu.semisimplicity",
                 "trace form of left multiplication is nondegenerate",
                 ok, **data)
