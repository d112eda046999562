"""Exact sparse linear algebra over Q.

Vectors are plain dicts mapping hashable keys to nonzero Fractions.  The
echelon structure keeps a reduced basis of a growing span: every stored row
has pivot coefficient 1 and its pivot key occurs in no other row, so
``reduce`` is a deterministic normal form modulo the span.  Pivots are chosen
as the key of highest rank (a user-supplied total order), which makes
reduction rewrite "high" keys into combinations of "low" ones.
"""

from __future__ import annotations

from fractions import Fraction

ZERO = Fraction(0)


def vec_axpy(target: dict, coeff, src: dict) -> dict:
    """target += coeff * src, dropping zero entries.  Mutates and returns target."""
    if coeff == 0:
        return target
    for k, c in src.items():
        nc = target.get(k, ZERO) + coeff * c
        if nc == 0:
            target.pop(k, None)
        else:
            target[k] = nc
    return target


def vec_scale(v: dict, coeff) -> dict:
    if coeff == 0:
        return {}
    return {k: coeff * c for k, c in v.items()}


class EchelonBasis:
    """Mutually reduced echelon basis of a span of sparse vectors.

    ``rank`` is a function key -> sortable value; the pivot of a row is its
    highest-ranked key.  Optional per-row tags (sparse vectors in a second
    key space) are carried through every elimination, so a tag that starts as
    a preimage of the row stays one.
    """

    def __init__(self, rank):
        self.rank = rank
        self.rows: dict = {}        # pivot key -> row vector (pivot coeff 1)
        self.tags: dict = {}        # pivot key -> tag vector
        self._occurs: dict = {}     # key -> set of pivots whose rows contain it

    def __len__(self):
        return len(self.rows)

    def pivots(self):
        return self.rows.keys()

    def _note(self, pivot, row):
        for k in row:
            self._occurs.setdefault(k, set()).add(pivot)

    def _unnote(self, pivot, keys):
        for k in keys:
            s = self._occurs.get(k)
            if s is not None:
                s.discard(pivot)
                if not s:
                    del self._occurs[k]

    def reduce(self, vec: dict) -> dict:
        """Normal form of vec modulo the span.  Does not mutate vec."""
        v = dict(vec)
        while True:
            hit = None
            hit_rank = None
            for k in v:
                if k in self.rows:
                    r = self.rank(k)
                    if hit is None or r > hit_rank:
                        hit, hit_rank = k, r
            if hit is None:
                return v
            vec_axpy(v, -v[hit], self.rows[hit])

    def reduce_tracked(self, vec: dict):
        """Return (residual, used) with vec = residual + sum used[p] * row[p]."""
        v = dict(vec)
        used: dict = {}
        while True:
            hit = None
            hit_rank = None
            for k in v:
                if k in self.rows:
                    r = self.rank(k)
                    if hit is None or r > hit_rank:
                        hit, hit_rank = k, r
            if hit is None:
                return v, used
            c = v[hit]
            used[hit] = used.get(hit, ZERO) + c
            vec_axpy(v, -c, self.rows[hit])

    def insert(self, vec: dict, tag: dict | None = None):
        """Add vec to the span.  Returns the new pivot key, or None if dependent."""
        v, used = self.reduce_tracked(vec)
        if not v:
            return None
        if tag is not None:
            tag = dict(tag)
            for p, c in used.items():
                if p in self.tags:
                    vec_axpy(tag, -c, self.tags[p])
        pivot = max(v, key=self.rank)
        inv = Fraction(1) / v[pivot]
        row = vec_scale(v, inv)
        if tag is not None:
            tag = vec_scale(tag, inv)
        # keep the basis mutually reduced: clear the new pivot everywhere
        for q in list(self._occurs.get(pivot, ())):
            other = self.rows[q]
            c = other.get(pivot)
            if c is None:
                continue
            old_keys = list(other)
            vec_axpy(other, -c, row)
            if q in self.tags and tag is not None:
                vec_axpy(self.tags[q], -c, tag)
            self._unnote(q, [k for k in old_keys if k not in other])
            self._note(q, other)
        self.rows[pivot] = row
        if tag is not None:
            self.tags[pivot] = tag
        self._note(pivot, row)
        return pivot


def dense_rank(rows: list[list[Fraction]]) -> int:
    """Rank of a dense rational matrix (row list), destructive on a copy."""
    m = [list(r) for r in rows]
    rank = 0
    ncols = len(m[0]) if m else 0
    for col in range(ncols):
        piv = None
        for r in range(rank, len(m)):
            if m[r][col] != 0:
                piv = r
                break
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        pv = m[rank][col]
        for r in range(len(m)):
            if r != rank and m[r][col] != 0:
                f = m[r][col] / pv
                mr, mp = m[r], m[rank]
                for c in range(col, ncols):
                    mr[c] -= f * mp[c]
        rank += 1
        if rank == len(m):
            break
    return rank


def dense_kernel(rows: list[list[Fraction]], ncols: int) -> list[list[Fraction]]:
    """Basis of the right kernel {x : M x = 0} of a dense rational matrix."""
    m = [list(r) for r in rows]
    pivots: list[int] = []
    rank = 0
    for col in range(ncols):
        piv = None
        for r in range(rank, len(m)):
            if m[r][col] != 0:
                piv = r
                break
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        pv = m[rank][col]
        m[rank] = [c / pv for c in m[rank]]
        for r in range(len(m)):
            if r != rank and m[r][col] != 0:
                f = m[r][col]
                mr, mp = m[r], m[rank]
                for c in range(col, ncols):
                    mr[c] -= f * mp[c]
        pivots.append(col)
        rank += 1
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        x = [ZERO] * ncols
        x[fc] = Fraction(1)
        for r, pc in enumerate(pivots):
            x[pc] = -m[r][fc]
        basis.append(x)
    return basis
