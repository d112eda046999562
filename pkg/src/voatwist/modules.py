"""Depth-truncated induced twisted modules.

A module is generated from a finite-dimensional module U over the twisted
quotient algebra.  The monomial alphabet consists of the positive-degree
generator modes (the generator modes close under the bracket in every shipped
model, together with the central vacuum mode), so the generic stage carries
the free normal-ordered action of those modes with the quotient algebra
acting on the tail through the degree-zero map.  Modes of composite elements
act through the shared coefficient recursion with fractional splitting; the
associativity-difference relations, the pairing radical and the lowest-weight
functor are computed on top of that action.

All constructions are per-degree and exact up to the built depth; statements
about the untruncated module are reported as verified up to that depth.
"""

from __future__ import annotations

from fractions import Fraction

from .lie import LieElement, LieTerm, lie_term, normalize, o_map, term_degree
from .linalg import EchelonBasis, dense_kernel, vec_axpy, vec_scale
from .reporting import check
from .scalars import rat_binomial
from .voa import (DepthError, GradedVector, GradingError, ModeEngine,
                  l_operator, neg_pow, vacuum)

ONE = Fraction(1)
ZERO = Fraction(0)


class ZhuModule:
    """Finite-dimensional module over a twisted quotient algebra.

    ``matrices[i]`` is the action of the i-th quotient basis class; the
    identity class must act as the identity and the product rule
    rho(x) rho(y) = rho(x*y) is validated on the closed table entries.
    """

    def __init__(self, algebra, matrices, label=None, validate=True):
        self.algebra = algebra
        self.dim = len(matrices[0]) if matrices else 0
        self.matrices = matrices
        self.label = label
        om = self.rho(algebra.omega)
        self.h = om[0][0] if self.dim == 1 else self._scalar_of(om)
        if validate:
            bad = self._validate()
            if bad:
                raise ValueError(f"action does not respect the product: {bad[:3]}")

    def _scalar_of(self, mat):
        n = self.dim
        s = mat[0][0] if n else None
        for i in range(n):
            for j in range(n):
                if mat[i][j] != (s if i == j else 0):
                    return None
        return s

    def rho(self, coords):
        n = self.dim
        out = [[ZERO] * n for _ in range(n)]
        for i, c in enumerate(coords):
            if c == 0:
                continue
            mi = self.matrices[i]
            for r in range(n):
                for s in range(n):
                    out[r][s] += c * mi[r][s]
        return out

    def _validate(self):
        alg = self.algebra
        bad = []
        ident = self.rho(alg.identity)
        if any(ident[i][j] != (1 if i == j else 0)
               for i in range(self.dim) for j in range(self.dim)):
            bad.append("identity")
        for (i, j), col in alg.table.items():
            if col is None:
                continue
            lhs = _matmul(self.matrices[i], self.matrices[j])
            rhs = self.rho(col)
            if lhs != rhs:
                bad.append((i, j))
        return bad


def _matmul(a, b):
    n = len(a)
    return [[sum((a[i][k] * b[k][j] for k in range(n)), ZERO)
             for j in range(n)] for i in range(n)]


def character_module(algebra, h) -> ZhuModule:
    """One-dimensional module with the conformal class acting by h.

    Requires the quotient to be generated by the conformal class; when the
    powers of that class satisfy a relation inside the computed window, h
    must be a root of it.
    """
    h = Fraction(h)
    n = algebra.dim
    powers = [list(algebra.identity)]
    ech = EchelonBasis(lambda k: k)
    ech.insert({i: c for i, c in enumerate(powers[0]) if c})
    dependence_at = None
    while len(powers) <= n:
        prev = powers[-1]
        mat = algebra.left_mult_matrix(algebra.omega)
        if mat is None:
            raise ValueError("conformal multiplication leaves the window")
        nxt = [sum((mat[r][k] * prev[k] for k in range(n)), ZERO)
               for r in range(n)]
        if ech.insert({i: c for i, c in enumerate(nxt) if c}) is None:
            dependence_at = len(powers)
            break
        powers.append(nxt)
    # express each basis class as a polynomial in the conformal class
    aug = [[powers[k][r] for k in range(len(powers))] +
           [ONE if r == s else ZERO for s in range(n)] for r in range(n)]
    sol = _solve_columns(aug, len(powers), n)
    if sol is None:
        raise ValueError("quotient is not generated by the conformal class")
    if dependence_at is not None:
        # minimal relation among the powers must annihilate h
        rel_aug = [[powers[k][r] for k in range(dependence_at)] +
                   [_pow_coords(algebra, dependence_at)[r]] for r in range(n)]
        rel = _solve_columns(rel_aug, dependence_at, 1)
        if rel is not None:
            val = sum(rel[k][0] * h**k for k in range(dependence_at))
            if h**dependence_at - val != 0:
                raise ValueError(
                    f"lowest weight {h} is not a root of the conformal class "
                    "relation in this quotient")
    mats = []
    for i in range(n):
        poly = [sol[k][i] for k in range(len(powers))]
        val = sum((poly[k] * h**k for k in range(len(poly))), ZERO)
        mats.append([[val]])
    return ZhuModule(algebra, mats, label=f"char(h={h})")


def _pow_coords(algebra, k):
    n = algebra.dim
    cur = list(algebra.identity)
    mat = algebra.left_mult_matrix(algebra.omega)
    for _ in range(k):
        cur = [sum((mat[r][j] * cur[j] for j in range(n)), ZERO)
               for r in range(n)]
    return cur


def _solve_columns(aug, nvars, ncols):
    """Solve M x = b for several right-hand columns; None when inconsistent."""
    m = [list(r) for r in aug]
    rank = 0
    piv_cols = []
    width = nvars + ncols
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
    for r in range(rank, len(m)):
        if any(m[r][nvars + j] != 0 for j in range(ncols)):
            return None
    sol = [[ZERO] * ncols for _ in range(nvars)]
    for r, col in enumerate(piv_cols):
        for j in range(ncols):
            sol[col][j] = m[r][nvars + j]
    return sol


def gen_terms(spec, lo, hi):
    """Generator modes (g, shift) with degree in [lo, hi], canonical order."""
    out = []
    step = Fraction(1, spec.T)
    for g, gen in enumerate(spec.generators):
        frac = Fraction(gen.gexp, spec.T)
        d = Fraction(0)
        # degrees congruent to wt - 1 - gexp/T mod 1
        base = Fraction(gen.weight - 1) - frac
        k0 = (lo - base).__ceil__() if False else None
        d = lo
        while d <= hi:
            if (d - base).denominator == 1:
                shift = Fraction(gen.weight - 1) - d
                out.append((g, shift, d))
            d += step
    out.sort(key=lambda t: (t[2], t[0], t[1]))
    return out


class _ModuleEngine(ModeEngine):
    """Composite-mode recursion targeting a module's graded atoms."""

    def __init__(self, module):
        super().__init__(module.spec)
        self.module = module

    def m_shift(self, g):
        gen = self.spec.generators[g]
        return Fraction(gen.gexp, self.spec.T)

    def lattice_shift(self, ckey):
        return Fraction(self.spec.key_gexp(ckey), self.spec.T)

    def gen_apply(self, g, mode, atom):
        return self.module.act_gen_atom(g, Fraction(mode), atom)

    def atom_degree(self, atom):
        return atom[0]


class InducedModule:
    """Graded module induced from a ZhuModule, with optional per-degree
    reductions defining the relation-quotient and simple stages."""

    def __init__(self, spec, algebra, zhu_module, depth, capacity=None,
                 stage="verma", reductions=None, core=None):
        self.spec = spec
        self.algebra = algebra
        self.U = zhu_module
        self.depth = Fraction(depth)
        if self.depth < 0 or (self.depth * spec.T).denominator != 1:
            raise GradingError("depth must be a nonnegative multiple of 1/T")
        self.capacity = Fraction(capacity) if capacity is not None \
            else self.depth + 6
        self.stage = stage
        self.reductions = reductions or {}
        if core is not None:
            self._basis, self._index, self._act_cache, self.engine, \
                self._gen_rho = core
            self.engine.module = self
        else:
            self._basis: dict = {}
            self._index: dict = {}
            self._act_cache: dict = {}
            self.engine = _ModuleEngine(self)
            self._gen_rho = {}
            for g in range(len(spec.generators)):
                key = spec.gen_key(g)
                coords = algebra.class_coords(GradedVector(spec, {key: ONE}))
                if coords is None:
                    raise ValueError("generator class leaves the quotient window")
                self._gen_rho[g] = zhu_module.rho(coords)

    def _core(self):
        return (self._basis, self._index, self._act_cache, self.engine,
                self._gen_rho)

    # ---------------------------------------------------------------- basis
    def degrees(self, upto=None):
        top = self.depth if upto is None else Fraction(upto)
        d = Fraction(0)
        step = Fraction(1, self.spec.T)
        while d <= top:
            yield d
            d += step

    def piece(self, deg):
        deg = Fraction(deg)
        if deg < 0:
            return []
        if deg > self.capacity:
            raise DepthError(
                f"degree {deg} exceeds module capacity {self.capacity}")
        if deg not in self._basis:
            factors = gen_terms(self.spec, Fraction(1, self.spec.T), deg)
            monos: list = []

            def rec(remaining, start, acc):
                if remaining == 0:
                    monos.append(tuple(acc))
                    return
                for i in range(start, len(factors)):
                    g, shift, fdeg = factors[i]
                    if fdeg > remaining:
                        break
                    acc.append((g, shift))
                    rec(remaining - fdeg, i, acc)
                    acc.pop()

            rec(deg, 0, [])
            basis = []
            for mono in sorted(monos):
                ordered = tuple(sorted(mono, key=lambda f: (f[1], f[0])))
                for t in range(self.U.dim):
                    basis.append((ordered, t))
            self._basis[deg] = basis
            self._index[deg] = {b: i for i, b in enumerate(basis)}
        return self._basis[deg]

    def atom(self, deg, mono, tail):
        deg = Fraction(deg)
        self.piece(deg)
        return (deg, self._index[deg][(mono, tail)])

    def graded_dims(self):
        out = {}
        for deg in self.degrees():
            red = self.reductions.get(deg)
            n = len(self.piece(deg))
            out[deg] = n - (len(red) if red else 0)
        return out

    def stage_basis(self, deg):
        deg = Fraction(deg)
        red = self.reductions.get(deg)
        n = len(self.piece(deg))
        if not red:
            return list(range(n))
        return [i for i in range(n) if (deg, i) not in red.rows]

    # ---------------------------------------------------------------- action
    def act_gen_atom(self, g, shift, atom) -> dict:
        ck = (g, shift, atom)
        hit = self._act_cache.get(ck)
        if hit is not None:
            return dict(hit)
        deg, idx = atom
        mono, tail = self.piece(deg)[idx]
        dt = Fraction(self.spec.generators[g].weight) - shift - 1
        out: dict = {}
        if not mono:
            if dt > 0:
                out = {self.atom(deg + dt, ((g, shift),), tail): ONE}
            elif dt == 0:
                mat = self._gen_rho[g]
                for t in range(self.U.dim):
                    if mat[t][tail] != 0:
                        out[self.atom(deg, (), t)] = mat[t][tail]
            # negative degree annihilates the tail
        else:
            h = mono[0]
            if dt > 0 and (shift, g) <= (h[1], h[0]):
                out = {self.atom(deg + dt, ((g, shift),) + mono, tail): ONE}
            else:
                rest_atom = self.atom(
                    deg - (Fraction(self.spec.generators[h[0]].weight)
                           - h[1] - 1), mono[1:], tail)
                inner = self.act_gen_atom(g, shift, rest_atom)
                for at2, c2 in inner.items():
                    res = self.act_gen_atom(h[0], h[1], at2)
                    vec_axpy(out, c2, res)
                br = self._bracket_terms(g, shift, h[0], h[1])
                for (bkey, bshift), bc in br.items():
                    res = self.act_base(bkey, bshift, {rest_atom: ONE})
                    vec_axpy(out, bc, res)
        self._act_cache[ck] = out
        return dict(out)

    def _bracket_terms(self, g1, s1, g2, s2) -> dict:
        from .lie import bracket
        el = bracket(lie_term(self.spec, self.spec.gen_key(g1), s1),
                     lie_term(self.spec, self.spec.gen_key(g2), s2))
        out = {}
        for t, c in el.terms.items():
            out[(t.base, t.shift)] = c
        return out

    def act_gen_atom_vec(self, g, shift, vec: dict) -> dict:
        out: dict = {}
        for atom, c in vec.items():
            vec_axpy(out, c, self.act_gen_atom(g, shift, atom))
        return out

    def act_base(self, base, shift, vec: dict) -> dict:
        """Action of the mode ``base(shift)`` on a raw module vector."""
        if base == ():
            # central vacuum mode: only the shift -1 symbol survives in the
            # mode algebra, acting by the identity class
            return dict(vec) if shift == -1 else {}
        gens = {self.spec.gen_key(g): g for g in range(len(self.spec.generators))}
        if base in gens:
            out: dict = {}
            for atom, c in vec.items():
                vec_axpy(out, c, self.act_gen_atom(gens[base], shift, atom))
            return out
        return self.engine.element_on({base: ONE}, shift, vec)

    def act_lie(self, elem: LieElement, vec: dict) -> dict:
        out: dict = {}
        for t, c in elem.terms.items():
            res = self.act_base(t.base, t.shift, vec)
            if res:
                vec_axpy(out, c, res)
        return out

    def act_element(self, terms: dict, K, vec: dict) -> dict:
        """Mode at K of a V-element (raw term dict) applied to a module vector."""
        return self.engine.element_on(terms, Fraction(K), vec)

    # ------------------------------------------------------------- reduction
    def reduce(self, vec: dict) -> dict:
        if not self.reductions:
            return dict(vec)
        by_deg: dict = {}
        for atom, c in vec.items():
            by_deg.setdefault(atom[0], {})[atom] = c
        out: dict = {}
        for deg, part in by_deg.items():
            red = self.reductions.get(deg)
            out.update(red.reduce(part) if red else part)
        return out

    def quotient_by(self, vectors, stage: str) -> "InducedModule":
        """New stage with the given raw vectors (grouped per degree) divided out."""
        reductions = {d: _copy_ech(e) for d, e in self.reductions.items()}
        for vec in vectors:
            by_deg: dict = {}
            for atom, c in vec.items():
                by_deg.setdefault(atom[0], {})[atom] = c
            for deg, part in by_deg.items():
                if deg > self.depth:
                    continue
                ech = reductions.get(deg)
                if ech is None:
                    ech = reductions[deg] = EchelonBasis(lambda a: a[1])
                ech.insert(part)
        return InducedModule(self.spec, self.algebra, self.U, self.depth,
                             self.capacity, stage, reductions,
                             core=self._core())

    # ------------------------------------------------------------- matrices
    def op_matrix(self, op, deg_from, deg_to):
        """Stage matrix of a linear map given by op(atom-dict) -> raw vector."""
        deg_from = Fraction(deg_from)
        deg_to = Fraction(deg_to)
        rows = self.stage_basis(deg_to)
        rindex = {idx: i for i, idx in enumerate(rows)}
        cols = []
        for idx in self.stage_basis(deg_from):
            img = self.reduce(op({(deg_from, idx): ONE}))
            col = [ZERO] * len(rows)
            for (dg, j), c in img.items():
                if dg != deg_to:
                    raise GradingError("operator is not graded as claimed")
                col[rindex[j]] = c
            cols.append(col)
        return [[cols[j][i] for j in range(len(cols))]
                for i in range(len(rows))]


def _copy_ech(e: EchelonBasis) -> EchelonBasis:
    new = EchelonBasis(e.rank)
    new.rows = {p: dict(r) for p, r in e.rows.items()}
    new.tags = {p: dict(t) for p, t in e.tags.items()}
    new._occurs = {k: set(s) for k, s in e._occurs.items()}
    return new


def verma_build(zhu_module: ZhuModule, algebra, depth, capacity=None)\
        -> InducedModule:
    """Free normal-ordered module on the positive generator modes over U."""
    return InducedModule(algebra.spec, algebra, zhu_module, depth, capacity)


# ------------------------------- two-sided expansions -----------------------

def _mode_lattice(spec, terms):
    r = {spec.key_gexp(k) for k in terms}
    if len(r) != 1:
        raise GradingError("element is not twist-homogeneous")
    return Fraction(r.pop(), spec.T)


def _weight_of(spec, terms):
    w = {spec.key_weight(k) for k in terms}
    if len(w) != 1:
        raise GradingError("element is not weight-homogeneous")
    return w.pop()


def _mode_range(shift, lo, hi):
    """Modes congruent to shift mod 1 in [lo, hi], ascending."""
    out = []
    m = Fraction(lo).__floor__() + shift
    while m < lo:
        m += 1
    while m <= hi:
        out.append(m)
        m += 1
    return out


def two_sided_coefficients(module: InducedModule, a: GradedVector,
                           b: GradedVector, w_atom, E, depth_window=None):
    """Coefficient tables of (z0+z2)^E Y(a,z0+z2) Y(b,z2) w  and of
    (z2+z0)^E Y(Y(a,z0)b, z2) w, keyed by the (z0, z2) exponent pair.

    Finite windows: exponents are enumerated down to a floor below which the
    direct-product side has no support, so agreement on the union of keys is
    agreement of the truncated series.
    """
    spec = module.spec
    wa, wb = _weight_of(spec, a.terms), _weight_of(spec, b.terms)
    ra, rb = _mode_lattice(spec, a.terms), _mode_lattice(spec, b.terms)
    dmax = module.depth if depth_window is None else Fraction(depth_window)
    degw = w_atom[0]
    alpha_floor = Fraction(-(wa + wb) - 2)
    beta_floor = -degw - wb - 2
    # a slot (alpha, beta) is fully computable only when every contributing
    # product-side intermediate v_n w (degree degw + wb + beta at l = 0)
    # fits under the module capacity; slots above the ceiling are dropped
    # from both sides rather than compared incompletely
    beta_ceil = module.capacity - degw - wb
    lhs: dict = {}
    w_vec = {w_atom: ONE}
    for n in _mode_range(rb, degw + wb - 1 - module.capacity, degw + wb - 1):
        y = module.act_element(b.terms, n, w_vec)
        if not y:
            continue
        degy = degw + wb - n - 1
        for m in _mode_range(ra, degy + wa - 1 - dmax, degy + wa - 1):
            x = module.act_element(a.terms, m, y)
            if not x:
                continue
            l = 0
            while Fraction(E) - m - 1 - l >= alpha_floor:
                coeff = rat_binomial(Fraction(E) - m - 1, l)
                beta = Fraction(l) - n - 1
                if coeff != 0 and beta <= beta_ceil:
                    slot = (Fraction(E) - m - 1 - l, beta)
                    cur = lhs.setdefault(slot, {})
                    vec_axpy(cur, coeff, x)
                    if not cur:
                        del lhs[slot]
                l += 1
    rhs: dict = {}
    l_min = wa + wb - 1 - spec.cutoff
    for l in range(l_min, wa + wb):
        prod = spec.element_mode(a.terms, l, b.terms)
        if not prod:
            continue
        wc = wa + wb - l - 1
        rc = Fraction(spec.key_gexp(next(iter(prod))), spec.T)
        for q in _mode_range(rc, degw + wc - 1 - dmax, degw + wc - 1):
            y = module.act_element(prod, q, w_vec)
            if not y:
                continue
            j = 0
            while Fraction(E) - j - q - 1 >= beta_floor:
                alpha = Fraction(j) - l - 1
                beta = Fraction(E) - j - q - 1
                if alpha >= alpha_floor and beta <= beta_ceil:
                    coeff = rat_binomial(Fraction(E), j)
                    if coeff != 0:
                        slot = (alpha, beta)
                        cur = rhs.setdefault(slot, {})
                        vec_axpy(cur, coeff, y)
                        if not cur:
                            del rhs[slot]
                j += 1
    return lhs, rhs


def relations_w(module: InducedModule, max_a_weight=3, max_b_weight=3):
    """Associativity-difference vectors over tail vectors of U.

    Returns a list of ((a, b, tail, z0-exp, z2-exp), vector) with nonzero
    difference vectors only, each homogeneous in degree <= depth.
    """
    spec = module.spec
    out = []
    for wa in range(1, max_a_weight + 1):
        for akey in spec.basis(wa):
            r = spec.key_gexp(akey)
            d = 1 if r == 0 else 0
            E = Fraction(wa - 1 + d) + Fraction(r, spec.T)
            a = GradedVector(spec, {akey: ONE})
            for wb in range(0, max_b_weight + 1):
                for bkey in spec.basis(wb):
                    b = GradedVector(spec, {bkey: ONE})
                    for t in range(module.U.dim):
                        w_atom = module.atom(Fraction(0), (), t)
                        lhs, rhs = two_sided_coefficients(
                            module, a, b, w_atom, E)
                        for slot in sorted(set(lhs) | set(rhs)):
                            diff = dict(lhs.get(slot, {}))
                            vec_axpy(diff, -ONE, rhs.get(slot, {}))
                            diff = {at: c for at, c in diff.items()
                                    if at[0] <= module.depth}
                            if diff:
                                out.append(((akey, bkey, t) + slot, diff))
    return out


def relations_quotient(module: InducedModule, rels=None) -> InducedModule:
    """Quotient by the module closure of the associativity differences."""
    if rels is None:
        rels = relations_w(module)
    vectors = [vec for _, vec in rels]
    staged = module.quotient_by(vectors, "mbar")
    # close under the generator modes until the span stabilizes
    terms = gen_terms(module.spec, -module.depth, module.depth)
    changed = True
    while changed:
        changed = False
        new_vecs = []
        for deg, ech in list(staged.reductions.items()):
            for row in list(ech.rows.values()):
                for g, shift, tdeg in terms:
                    if tdeg == 0 and not row:
                        continue
                    target = deg + tdeg
                    if target < 0 or target > staged.depth:
                        continue
                    img = staged.reduce(module.act_base(
                        module.spec.gen_key(g), shift, dict(row)))
                    if img:
                        new_vecs.append(img)
        if new_vecs:
            before = sum(len(e) for e in staged.reductions.values())
            staged = staged.quotient_by(new_vecs, "mbar")
            after = sum(len(e) for e in staged.reductions.values())
            changed = after > before
    return staged


# ------------------------------- radical and the simple stage ---------------

def _negative_words(spec, total_deg, max_len):
    """Ordered products of negative generator modes of the given total degree."""
    neg = gen_terms(spec, -total_deg, Fraction(-1, spec.T))
    words: list = []

    def rec(remaining, acc):
        if remaining == 0:
            words.append(tuple(acc))
            return
        if len(acc) >= max_len:
            return
        for g, shift, d in neg:
            if -d <= remaining:
                acc.append((g, shift))
                rec(remaining + d, acc)
                acc.pop()

    rec(total_deg, [])
    return words


def pairing_matrix(module: InducedModule, deg, extra_len=2):
    """Rows of <u', word . v> over words of degree -deg, v in the stage basis."""
    deg = Fraction(deg)
    basis_idx = module.stage_basis(deg)
    max_len = int(deg * module.spec.T) + extra_len
    words = _negative_words(module.spec, deg, max_len)
    rows = []
    for word in words:
        cols = []
        for idx in basis_idx:
            vec = {(deg, idx): ONE}
            for g, shift in reversed(word):
                vec = module.act_gen_atom_vec(g, shift, vec)
                if not vec:
                    break
            col = [ZERO] * module.U.dim
            for (dg, j), c in vec.items():
                if dg != 0:
                    raise GradingError("pairing word has wrong degree")
                mono, tail = module.piece(Fraction(0))[j]
                col[tail] += c
            cols.append(col)
        for t in range(module.U.dim):
            rows.append([cols[i][t] for i in range(len(basis_idx))])
    return rows, len(words)


def radical_and_simple(module: InducedModule, extra_len=2):
    """Quotient by the maximal graded submodule met trivially by the tail.

    The radical at each degree is the kernel of the pairing against all
    negative-mode words (their span equals the span of all degree-lowering
    operators here, since composite modes are generated by generator modes).
    """
    if module.U.dim > 1 and module.U.label is None:
        pass  # caller is trusted to hand a simple module; ranks are reported
    vectors = []
    ranks = {}
    for deg in module.degrees():
        if deg == 0:
            ranks[deg] = (module.U.dim, module.U.dim)
            continue
        rows, _n = pairing_matrix(module, deg, extra_len)
        basis_idx = module.stage_basis(deg)
        kern = dense_kernel(rows, len(basis_idx)) if rows else \
            [[ONE if i == j else ZERO for i in range(len(basis_idx))]
             for j in range(len(basis_idx))]
        for null in kern:
            vec = {(deg, basis_idx[i]): c for i, c in enumerate(null) if c}
            if vec:
                vectors.append(vec)
        ranks[deg] = (len(basis_idx) - len(kern), len(basis_idx))
    simple = module.quotient_by(vectors, "simple")
    return simple, ranks


def simplicity_witness(module: InducedModule, extra_len=2) -> dict:
    """Full pairing rank at every retained degree, stable under a longer bound."""
    bad = []
    data = {}
    for deg in module.degrees():
        if deg == 0:
            continue
        n = len(module.stage_basis(deg))
        rows, nwords = pairing_matrix(module, deg, extra_len)
        from .linalg import dense_rank
        r1 = dense_rank(rows) if rows else 0
        rows2, _ = pairing_matrix(module, deg, extra_len + 1)
        r2 = dense_rank(rows2) if rows2 else 0
        data[str(deg)] = {"dim": n, "rank": r1, "rank_longer_words": r2,
                          "words": nwords}
        if r1 != n or r2 != r1:
            bad.append(str(deg))
    return check("module.simplicity",
                 "the tail pairing has full rank at every retained degree, "
                 "stable under longer operator words",
                 not bad, degrees=data, failures=bad)


# ------------------------------- the lowest-weight functor ------------------

def omega_functor(module: InducedModule, base_weight_bound=4):
    """Joint kernel of the negative modes within depth, as a ZhuModule.

    Conditions run over the modes c(m) of every normal-form base of weight at
    most the bound, with -depth <= deg c(m) < 0.  At truncation this imposes
    only finitely many of the annihilation conditions, so the result is an
    upper bound for the true lowest-weight space; the conditions used are
    reported.
    """
    if module.depth < Fraction(1, module.spec.T):
        raise DepthError("lowest-weight extraction needs depth >= 1/T")
    spec = module.spec
    from .lie import _context
    ctx = _context(spec)
    conditions = []
    for w in range(0, min(base_weight_bound, spec.cutoff) + 1):
        for key in ctx.complement[w]:
            if key == ():
                continue
            shift_frac = Fraction(spec.key_gexp(key), spec.T)
            # modes m in shift_frac + Z with -depth <= wt - m - 1 < 0
            m = Fraction(w) - 1 + Fraction(1, spec.T)
            while (m - shift_frac).denominator != 1:
                m += Fraction(1, spec.T)
            while Fraction(w) - m - 1 >= -module.depth:
                conditions.append((key, m))
                m += 1
    # per-degree kernel intersection
    omega_atoms = []
    coords = []
    for deg in module.degrees():
        basis_idx = module.stage_basis(deg)
        if not basis_idx:
            continue
        rows = []
        for key, m in conditions:
            tdeg = Fraction(spec.key_weight(key)) - m - 1
            if deg + tdeg < 0:
                continue  # annihilates by grading alone
            mat = module.op_matrix(
                lambda v, key=key, m=m: module.act_base(key, m, v),
                deg, deg + tdeg)
            rows.extend(mat)
        if rows:
            kern = dense_kernel(rows, len(basis_idx))
        else:
            kern = [[ONE if i == j else ZERO for i in range(len(basis_idx))]
                    for j in range(len(basis_idx))]
        for null in kern:
            omega_atoms.append(deg)
            coords.append({(deg, basis_idx[i]): c
                           for i, c in enumerate(null) if c})
    return omega_atoms, coords, conditions


def omega_action(module: InducedModule, omega_coords):
    """Action of the quotient classes on the lowest-weight space.

    Returns (ZhuModule or None, records): the class [c] acts through the
    degree-zero mode of c; the action must preserve the space, and the
    vectors of the relation span must act as zero.
    """
    spec = module.spec
    alg = module.algebra
    records = []
    n = len(omega_coords)
    ech = EchelonBasis(lambda a: a)
    basis_vecs = []
    for i, vec in enumerate(omega_coords):
        ech.insert({a: c for a, c in vec.items()}, tag={i: ONE})
        basis_vecs.append(vec)
    mats = []
    closed = True
    for bi, key in enumerate(alg.basis_keys):
        elem = GradedVector(spec, {key: ONE})
        mat = [[ZERO] * n for _ in range(n)]
        for j, vec in enumerate(basis_vecs):
            img = module.reduce(module.act_lie(o_map(elem), vec))
            residual, used = ech.reduce_tracked(img)
            if residual:
                closed = False
                break
            comb: dict = {}
            for piv, c in used.items():
                vec_axpy(comb, c, ech.tags[piv])
            for i, c in comb.items():
                mat[i][j] = c
        if not closed:
            break
        mats.append(mat)
    records.append(check(
        "module.omega_closed",
        "degree-zero modes preserve the lowest-weight space", closed))
    if not closed:
        return None, records
    # sampled relation vectors act as zero
    from .zhu import iter_spanning
    bad = []
    seen = 0
    for desc, terms in iter_spanning(spec, min(4, alg.N), min(2, alg.K)):
        if seen >= 25:
            break
        v = GradedVector(spec, terms)
        if v.is_zero():
            continue
        seen += 1
        for vec in basis_vecs:
            total: dict = {}
            for w in v.weights():
                comp = v.weight_component(w)
                if comp.gexp() != 0:
                    continue
                img = module.act_lie(o_map(comp), vec)
                vec_axpy(total, ONE, img)
            if module.reduce(total):
                bad.append(desc)
                break
    records.append(check(
        "module.omega_annihilation",
        "relation-span elements act as zero on lowest-weight vectors",
        not bad, sampled=seen, failures=bad[:5]))
    try:
        zm = ZhuModule(alg, mats, label="omega", validate=True)
        records.append(check(
            "module.omega_module",
            "lowest-weight action respects the quotient product", True))
    except ValueError as exc:
        zm = ZhuModule(alg, mats, label="omega", validate=False)
        records.append(check(
            "module.omega_module",
            "lowest-weight action respects the quotient product",
            False, error=str(exc)))
    return zm, records


def roundtrip_check(module: InducedModule) -> dict:
    """The lowest-weight space of the simple stage reproduces U exactly."""
    degs, coords, _conds = omega_functor(module)
    dim_ok = len(coords) == module.U.dim
    concentrated = all(d == 0 for d in degs)
    data = {"omega_dim": len(coords), "expected": module.U.dim,
            "degrees": [str(d) for d in degs]}
    if not (dim_ok and concentrated):
        return check("module.roundtrip",
                     "the lowest-weight space of the simple quotient is U",
                     False, **data)
    zm, records = omega_action(module, coords)
    if zm is None:
        return check("module.roundtrip",
                     "the lowest-weight space of the simple quotient is U",
                     False, reason="action does not close", **data)
    # base change C: columns are the omega vectors in tail coordinates
    n = module.U.dim
    C = [[ZERO] * n for _ in range(n)]
    for j, vec in enumerate(coords):
        for (dg, idx), c in vec.items():
            mono, tail = module.piece(dg)[idx]
            if mono:
                return check("module.roundtrip",
                             "the lowest-weight space of the simple quotient"
                             " is U", False, reason="vector not in the tail",
                             **data)
            C[tail][j] = c
    ok = True
    for bi in range(len(module.algebra.basis_keys)):
        lhs = _matmul(module.U.matrices[bi], C)
        rhs = _matmul(C, zm.matrices[bi])
        if lhs != rhs:
            ok = False
            break
    sub_ok = all(r["status"] == "pass" for r in records)
    return check("module.roundtrip",
                 "the lowest-weight space of the simple quotient is U with "
                 "the same class action", ok and sub_ok, **data)


# ------------------------------- identity suites -----------------------------

def check_commutator(module: InducedModule, max_weight=3, max_swing=None)\
        -> dict:
    """[u_m, v_n] = sum_i C(m,i) (u_i v)_{m+n-i} on every stage basis vector."""
    spec = module.spec
    swing = Fraction(max_swing) if max_swing is not None else module.depth
    bad = []
    tested = 0
    keys = [k for w in range(1, max_weight + 1) for k in spec.basis(w)]
    for uk in keys:
        wu = spec.key_weight(uk)
        ru = Fraction(spec.key_gexp(uk), spec.T)
        for vk in keys:
            wv = spec.key_weight(vk)
            rv = Fraction(spec.key_gexp(vk), spec.T)
            for deg in module.degrees():
                for idx in module.stage_basis(deg):
                    atom_vec = {(deg, idx): ONE}
                    for m in _mode_range(ru, wu - 1 - swing, wu - 1 + deg):
                        for n in _mode_range(rv, wv - 1 - swing,
                                             wv - 1 + deg):
                            # both orders of application must stay in range
                            d_after_n = deg + wv - n - 1
                            d_after_m = deg + wu - m - 1
                            final = deg + wu + wv - m - n - 2
                            if final < 0 or final > module.depth:
                                continue
                            if d_after_n > module.capacity - 2 or \
                               d_after_m > module.capacity - 2 or \
                               d_after_n < 0 and d_after_m < 0:
                                continue
                            u_terms = {uk: ONE}
                            v_terms = {vk: ONE}
                            lhs = module.act_element(
                                u_terms, m, module.act_element(
                                    v_terms, n, atom_vec))
                            vec_axpy(lhs, -ONE, module.act_element(
                                v_terms, n, module.act_element(
                                    u_terms, m, atom_vec)))
                            rhs: dict = {}
                            for i in range(0, wu + wv):
                                coeff = rat_binomial(m, i)
                                if coeff == 0:
                                    continue
                                prod = spec.element_mode(u_terms, i, v_terms)
                                if prod:
                                    vec_axpy(rhs, coeff, module.act_element(
                                        prod, m + n - i, atom_vec))
                            diff = module.reduce(lhs)
                            vec_axpy(diff, -ONE, module.reduce(rhs))
                            diff = {a: c for a, c in diff.items()
                                    if a[0] <= module.depth}
                            tested += 1
                            if diff:
                                bad.append((uk, vk, str(m), str(n),
                                            str(deg), idx))
    return check("module.commutator",
                 "mode commutators match the binomial transform of the "
                 "products on every graded piece",
                 not bad, tested=tested, failures=bad[:10])


def min_assoc_power(module: InducedModule, a: GradedVector, w_atom) -> int:
    """Least k >= 0 with z^{k + r/T} Y(a, z) w supported in positive powers.

    Scans modes downward from the top of the annihilation range; creation
    modes only deepen the target degree, so the scan stops at the first
    nonzero action (or once the target leaves the built capacity).
    """
    spec = module.spec
    ra = _mode_lattice(spec, a.terms)
    wa = _weight_of(spec, a.terms)
    degw = w_atom[0]
    for m in reversed(_mode_range(ra, wa - 1 + degw - module.capacity,
                                  wa - 1 + degw)):
        if module.act_element(a.terms, m, {w_atom: ONE}):
            return max(0, int(m - ra) + 2)
    return 0


def check_associativity_twisted(module: InducedModule, max_weight=2) -> dict:
    """(z0+z2)^{k+r/T} Y(u,z0+z2)Y(v,z2)w = (z2+z0)^{k+r/T} Y(Y(u,z0)v,z2)w,
    coefficientwise over the finite window within depth."""
    spec = module.spec
    bad = []
    used = {}
    tested = 0
    keys = [k for w in range(1, max_weight + 1) for k in spec.basis(w)]
    for uk in keys:
        for vk in keys:
            a = GradedVector(spec, {uk: ONE})
            b = GradedVector(spec, {vk: ONE})
            ra = _mode_lattice(spec, a.terms)
            for deg in module.degrees():
                for idx in module.stage_basis(deg):
                    atom = (deg, idx)
                    k = min_assoc_power(module, a, atom)
                    E = Fraction(k) + ra
                    lhs, rhs = two_sided_coefficients(module, a, b, atom, E)
                    used[(str(uk), str(vk), str(deg), idx)] = k
                    for slot in sorted(set(lhs) | set(rhs)):
                        lv = module.reduce(lhs.get(slot, {}))
                        rv = module.reduce(rhs.get(slot, {}))
                        lv = {x: c for x, c in lv.items()
                              if x[0] <= module.depth}
                        rv = {x: c for x, c in rv.items()
                              if x[0] <= module.depth}
                        tested += 1
                        if lv != rv:
                            bad.append((uk, vk, str(deg), idx,
                                        str(slot[0]), str(slot[1])))
    return check("module.twisted_associativity",
                 "both twisted association orders agree at every extracted "
                 "coefficient within depth",
                 not bad, coefficients=tested,
                 powers_used=sorted(set(used.values())),
                 failures=bad[:10])


def l0_spectrum(module: InducedModule) -> dict:
    """The degree-zero conformal mode acts on degree n by n + h exactly."""
    spec = module.spec
    om = GradedVector(spec, spec.conformal)
    h = module.U.h
    if h is None:
        return check("module.l0_spectrum",
                     "conformal zero mode acts by degree + lowest weight",
                     None, reason="the conformal class is not scalar on U")
    bad = []
    eigen = {}
    for deg in module.degrees():
        for idx in module.stage_basis(deg):
            vec = {(deg, idx): ONE}
            img = module.reduce(module.act_lie(o_map(om), vec))
            expect = vec_scale(vec, h + deg)
            if img != expect:
                bad.append((str(deg), idx))
        eigen[str(deg)] = str(h + deg)
    return check("module.l0_spectrum",
                 "conformal zero mode acts by degree + lowest weight",
                 not bad, eigenvalues=eigen, failures=bad[:10])


# ------------------------------- contragredient -----------------------------

class Contragredient:
    """Graded dual with adjoint mode action (a module for the inverse twist)."""

    def __init__(self, module: InducedModule):
        self.module = module
        self.spec = module.spec
        self.dims = {deg: len(module.stage_basis(deg))
                     for deg in module.degrees()}

    def adjoint_matrix(self, terms: dict, K, deg_from):
        """Matrix of the dual mode at K from dual degree deg_from.

        The dual mode at K raises dual degree by wt - K - 1 like the original;
        its matrix is the transpose of sum_j (-1)^wt / j! (L1^j a)_{2wt-j-K-2}
        mapping the original piece at (deg_from + wt - K - 1) to deg_from.
        """
        spec = self.spec
        wt = _weight_of(spec, terms)
        deg_to = Fraction(deg_from) + wt - K - 1
        if deg_to < 0 or deg_to > self.module.depth:
            return None, deg_to
        mod = self.module
        cur = GradedVector(spec, terms)
        mat = None
        j = 0
        fact = ONE
        sign = neg_pow(wt)
        while not cur.is_zero():
            mode = 2 * wt - j - K - 2
            m = mod.op_matrix(
                lambda v, t=dict(cur.terms), mode=mode:
                mod.act_element(t, mode, v), deg_to, Fraction(deg_from))
            coeff = sign * fact
            if mat is None:
                mat = [[coeff * x for x in row] for row in m]
            else:
                for r in range(len(m)):
                    for s in range(len(m[0])):
                        mat[r][s] += coeff * m[r][s]
            j += 1
            fact = fact / j
            cur = l_operator(1, cur)
        if mat is None:
            n_to = len(mod.stage_basis(deg_to))
            n_from = len(mod.stage_basis(Fraction(deg_from)))
            mat = [[ZERO] * n_from for _ in range(n_to)]
        return [list(col) for col in zip(*mat)], deg_to


def check_contragredient(module: InducedModule, max_weight=2,
                         depth_window=None) -> dict:
    """Dual dims match, dual modes satisfy the commutator law, and the double
    dual reproduces the original modes on sampled slots."""
    spec = module.spec
    dual = Contragredient(module)
    window = Fraction(depth_window) if depth_window is not None \
        else module.depth
    dims_ok = all(dual.dims[deg] == len(module.stage_basis(deg))
                  for deg in module.degrees())
    keys = [k for w in range(1, max_weight + 1) for k in spec.basis(w)]
    bad = []
    tested = 0
    for uk in keys:
        wu = spec.key_weight(uk)
        ru = Fraction(spec.key_gexp(uk), spec.T)
        for vk in keys:
            wv = spec.key_weight(vk)
            rv = Fraction(spec.key_gexp(vk), spec.T)
            for deg in module.degrees(window):
                # dual modes move along the inverse-twist lattice (-r mod T)
                for m in _mode_range(-ru, wu - 1 - window, wu - 1 + window):
                    for n in _mode_range(-rv, wv - 1 - window,
                                         wv - 1 + window):
                        dm = Fraction(deg) + wv - n - 1
                        df = dm + wu - m - 1
                        if dm < 0 or dm > window or df < 0 or df > window:
                            continue
                        am_full = _dual_compose(dual, {vk: ONE}, n,
                                                {uk: ONE}, m, deg)
                        ma_full = _dual_compose_rev(dual, {vk: ONE}, n,
                                                    {uk: ONE}, m, deg)
                        if am_full is None or ma_full is None:
                            continue
                        comm = [[am_full[i][j] - ma_full[i][j]
                                 for j in range(len(am_full[0]))]
                                for i in range(len(am_full))]
                        rhs = None
                        for i in range(0, wu + wv):
                            coeff = rat_binomial(m, i)
                            if coeff == 0:
                                continue
                            prod = spec.element_mode({uk: ONE}, i, {vk: ONE})
                            if not prod:
                                continue
                            by_w: dict = {}
                            for key, c in prod.items():
                                by_w.setdefault(
                                    spec.key_weight(key), {})[key] = c
                            for w, part in by_w.items():
                                mat, _ = dual.adjoint_matrix(
                                    part, m + n - i, deg)
                                if mat is None:
                                    continue
                                if rhs is None:
                                    rhs = [[coeff * x for x in row]
                                           for row in mat]
                                else:
                                    for r in range(len(mat)):
                                        for s in range(len(mat[0])):
                                            rhs[r][s] += coeff * mat[r][s]
                        if rhs is None:
                            rhs = [[ZERO] * len(comm[0])
                                   for _ in range(len(comm))]
                        tested += 1
                        if comm != rhs:
                            bad.append((uk, vk, str(m), str(n), str(deg)))
    # double dual matches the original action on sampled slots
    dd_bad = []
    for uk in keys[:2]:
        wu = spec.key_weight(uk)
        ru = Fraction(spec.key_gexp(uk), spec.T)
        for deg in module.degrees(min(window, Fraction(3, 2))):
            for K in _mode_range(ru, wu - 1 - Fraction(3, 2),
                                 wu - 1 + Fraction(3, 2)):
                dd = _double_dual_matrix(dual, {uk: ONE}, K, deg)
                if dd is None:
                    continue
                direct = module.op_matrix(
                    lambda v, t={uk: ONE}, K=K: module.act_element(t, K, v),
                    deg, Fraction(deg) + wu - K - 1) \
                    if 0 <= Fraction(deg) + wu - K - 1 <= module.depth else None
                if direct is not None and dd != direct:
                    dd_bad.append((uk, str(K), str(deg)))
    ok = dims_ok and not bad and not dd_bad
    return check("module.contragredient",
                 "dual dims match, dual modes satisfy the commutator law, "
                 "and the double dual restores the original modes",
                 ok, commutators_tested=tested,
                 failures=(bad + dd_bad)[:10])


def _dual_compose(dual, t1, n, t2, m, deg):
    m1, dmid = dual.adjoint_matrix(t1, n, deg)
    if m1 is None:
        return None
    m2, dfin = dual.adjoint_matrix(t2, m, dmid)
    if m2 is None:
        return None
    return _matmul_rect(m2, m1)


def _dual_compose_rev(dual, t1, n, t2, m, deg):
    m2, dmid = dual.adjoint_matrix(t2, m, deg)
    if m2 is None:
        return None
    m1, dfin = dual.adjoint_matrix(t1, n, dmid)
    if m1 is None:
        return None
    return _matmul_rect(m1, m2)


def _matmul_rect(a, b):
    if not a or not b:
        return [[]]
    n, k, k2, p = len(a), len(a[0]), len(b), len(b[0])
    return [[sum((a[i][t] * b[t][j] for t in range(k)), ZERO)
             for j in range(p)] for i in range(n)]


def _double_dual_matrix(dual, terms, K, deg):
    """Mode of the double dual at K from original degree deg."""
    spec = dual.spec
    wt = _weight_of(spec, terms)
    deg_to = Fraction(deg) + wt - K - 1
    if deg_to < 0 or deg_to > dual.module.depth:
        return None
    # adjoint taken inside the dual: transpose of the dual-side adjoint sum
    cur = GradedVector(spec, terms)
    mat = None
    j = 0
    fact = ONE
    sign = neg_pow(wt)
    while not cur.is_zero():
        mode = 2 * wt - j - K - 2
        m, _ = dual.adjoint_matrix(dict(cur.terms), mode, deg_to)
        if m is not None:
            coeff = sign * fact
            if mat is None:
                mat = [[coeff * x for x in row] for row in m]
            else:
                for r in range(len(m)):
                    for s in range(len(m[0])):
                        mat[r][s] += coeff * m[r][s]
        j += 1
        fact = fact / j
        cur = l_operator(1, cur)
    if mat is None:
        return None
    return [list(col) for col in zip(*mat)]
