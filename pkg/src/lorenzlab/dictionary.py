"""The fixed family of test functions that metrizes weak* convergence.

g_0 is the hat ``max(0, 1 - |Xi|/0.5)`` centred on the singularity; the other
twenty are products of Chebyshev polynomials ``T_i(xi1) T_j(xi2) T_k(xi3)`` of
total degree at most 3.  Member k carries weight 2**-k.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np
from numpy.polynomial import chebyshev

HAT_RADIUS = 0.5

CHEB_TRIPLES = sorted(
    (t for t in product(range(4), repeat=3) if sum(t) <= 3),
    key=lambda t: (sum(t), tuple(-v for v in t)),
)
SIZE = 1 + len(CHEB_TRIPLES)
WEIGHTS = np.array([2.0 ** -k for k in range(SIZE)])

# power-basis coefficients of T_0..T_3
_CHEB_POW = [chebyshev.cheb2poly([0] * i + [1]) for i in range(4)]


def _cheb(i, x):
    return chebyshev.chebval(x, [0] * i + [1])


def hat(points) -> np.ndarray:
    pts = np.atleast_2d(points)
    return np.maximum(0.0, 1.0 - np.linalg.norm(pts, axis=1) / HAT_RADIUS)


def evaluate(index: int, points) -> np.ndarray:
    """Value of member ``index`` at ambient points of shape (N, 3)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if index == 0:
        return hat(pts)
    i, j, k = triple(index)
    return _cheb(i, pts[:, 0]) * _cheb(j, pts[:, 1]) * _cheb(k, pts[:, 2])


def evaluate_all(points) -> np.ndarray:
    """All members at the given points, shape (N, SIZE)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.stack([evaluate(k, pts) for k in range(SIZE)], axis=1)


def triple(index: int):
    if not 1 <= index < SIZE:
        raise KeyError(f"no Chebyshev member with index {index}")
    return CHEB_TRIPLES[index - 1]


def index_of(triple_ijk) -> int:
    """Index of the Chebyshev member T_i T_j T_k."""
    return 1 + CHEB_TRIPLES.index(tuple(triple_ijk))


def at_sigma() -> np.ndarray:
    """Dictionary values at the singularity (the origin of the cube)."""
    return evaluate_all(np.zeros((1, 3)))[0]


def lipschitz_constants() -> np.ndarray:
    """Euclidean Lipschitz bounds on [-1,1]^3 (|T_n'| <= n^2)."""
    out = [1.0 / HAT_RADIUS]
    for i, j, k in CHEB_TRIPLES:
        out.append(math.sqrt(i ** 4 + j ** 4 + k ** 4))
    return np.array(out)


def monomial_table():
    """Coefficient tensor C[m, a, b, c] of xi1^a xi2^b xi3^c in member m (m >= 1)."""
    table = np.zeros((SIZE, 4, 4, 4))
    for m in range(1, SIZE):
        i, j, k = triple(m)
        for a, ca in enumerate(_CHEB_POW[i]):
            for b, cb in enumerate(_CHEB_POW[j]):
                for c, cc in enumerate(_CHEB_POW[k]):
                    table[m, a, b, c] = ca * cb * cc
    return table


MONOMIALS = [(a, b, c) for a in range(4) for b in range(4) for c in range(4) if a + b + c <= 3]
_TABLE = monomial_table()
# rows: member, cols: monomial index from MONOMIALS
MONO_COEFF = np.array([[_TABLE[m, a, b, c] for (a, b, c) in MONOMIALS] for m in range(SIZE)])
