"""Independent brute-force oracles."""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations


def normal_equations(X, y) -> list[Fraction]:
    """Solve X'X b = X'y exactly with Gauss-Jordan over rationals."""
    Xf = [[Fraction(float(v)) for v in row] for row in X]
    yf = [Fraction(float(v)) for v in y]
    p = len(Xf[0])
    A = [[sum((r[i] * r[j] for r in Xf), Fraction(0)) for j in range(p)]
         + [sum((r[i] * t for r, t in zip(Xf, yf)), Fraction(0))] for i in range(p)]
    for c in range(p):
        piv = next(r for r in range(c, p) if A[r][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        inv = 1 / A[c][c]
        A[c] = [v * inv for v in A[c]]
        for r in range(p):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return [A[i][p] for i in range(p)]


def best_subset(values, k) -> float:
    """Largest achievable sum of ``k`` entries, by enumerating every subset."""
    if k == 0:
        return 0.0
    return max(sum(values[i] for i in c) for c in combinations(range(len(values)), k))
