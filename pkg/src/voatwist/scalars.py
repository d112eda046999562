"""Exact rational scalars and generalized binomial coefficients.

All coefficients in this package live in Q, represented by
``fractions.Fraction`` (always reduced, positive denominator).  The binomial
coefficient C(q, k) is allowed a rational upper argument q, as needed for
residue expansions of (1+z)^q with q in (1/T)Z.
"""

from __future__ import annotations

from fractions import Fraction

#: alias used throughout the package
Q = Fraction

ZERO = Q(0)
ONE = Q(1)


def rat(x) -> Fraction:
    """Coerce ints, Fractions and 'p/q' strings to an exact Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"not an exact rational: {x!r}")


def rat_binomial(q, k: int) -> Fraction:
    """C(q, k) = q(q-1)...(q-k+1)/k! for rational q and integer k >= 0.

    Total for k >= 0; returns 1 for k = 0 (empty product).
    """
    if k < 0:
        raise ValueError("lower binomial argument must be >= 0")
    q = rat(q)
    num = ONE
    for i in range(k):
        num *= q - i
        if num == 0:
            return ZERO
    den = 1
    for i in range(2, k + 1):
        den *= i
    return num / den


def binomial_series(q, max_k: int) -> list[Fraction]:
    """Coefficients of z^0..z^max_k in (1+z)^q, i.e. [C(q,0), ..., C(q,max_k)].

    Computed by the multiplicative recurrence C(q,k) = C(q,k-1)*(q-k+1)/k.
    """
    if max_k < 0:
        raise ValueError("max_k must be >= 0")
    q = rat(q)
    out = [ONE]
    c = ONE
    for k in range(1, max_k + 1):
        c = c * (q - (k - 1)) / k
        out.append(c)
    return out
