"""Independent reference computations used to freeze expected values.

Nothing here imports the package under test: maps and functions are plain
Python callables and every sum is an explicit enumeration.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction


def brute_iterate(maps, weights, h, m, x):
    """T^m h(x) by summing over all (N+1)^m words, innermost letter applied first."""
    total = 0.0
    for word in itertools.product(range(len(maps)), repeat=m):
        w, y = 1.0, x
        for letter in reversed(word):
            y = maps[letter](y)
            w *= weights[letter]
        total += w * h(y)
    return total


def brute_alpha(weights, m):
    """Distribution of the sum of m i.i.d. letters modulo the alphabet size (exact rationals)."""
    size = len(weights)
    p = [Fraction(w).limit_denominator(10**9) for w in weights]
    dist = [Fraction(0)] * size
    for word in itertools.product(range(size), repeat=m):
        prob = math.prod((p[k] for k in word), start=Fraction(1))
        dist[sum(word) % size] += prob
    return [float(d) for d in dist]


def dyadic_term(x, m):
    """T^m g(x) for x -> x^2 and g = x - x^2."""
    return x ** (2.0 ** min(m, 1000)) - x ** (2.0 ** min(m + 1, 1000))


def dyadic_partial(x, k):
    """g_k(x) = x - x^(2^k) by telescoping."""
    return x - x ** (2.0 ** min(k, 1000))


def dyadic_solution(x):
    return x if x < 1.0 else 0.0


def swap(u, v):
    def f(x):
        if x == u:
            return v
        if x == v:
            return u
        return x
    return f


def cesaro(seq, n, k):
    return sum(seq[k:k + n]) / n


def doubling_blocks(length):
    """0, 1,1, 0,0,0,0, 1 x 8, ...: block j has length 2^j and value j mod 2."""
    out, j = [], 0
    while len(out) < length:
        out.extend([float(j % 2)] * 2 ** j)
        j += 1
    return out[:length]


def wilson(successes, n, z=1.96):
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return centre - half, centre + half
