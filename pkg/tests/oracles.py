"""Brute-force reference answers for the decoder tests."""

from itertools import combinations

import numpy as np


def odd_subsets(neighborhood):
    for size in range(1, len(neighborhood) + 1, 2):
        yield from combinations(neighborhood, size)


def exhaustive_cuts(x, neighborhood, epsilon=1e-9):
    """Every odd V whose parity inequality is violated by more than epsilon."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    found = []
    for subset in odd_subsets(tuple(neighborhood)):
        inside = set(subset)
        lhs = sum(x[i] if i in inside else -x[i] for i in neighborhood)
        if (violation := lhs - (len(subset) - 1)) > epsilon:
            found.append((tuple(sorted(subset)), violation))
    return found


def lp_optimum_by_vertices(objective, A=None, b=None, tol=1e-9):
    """
    min c'x over {Ax <= b, 0 <= x <= 1} by enumerating every vertex: each choice
    of n linearly independent hyperplanes among the rows and box sides.
    Returns (value, x) of the best feasible vertex.
    """
    c = np.asarray(objective, dtype=np.float64)
    n = c.shape[0]
    A = np.zeros((0, n)) if A is None else np.asarray(A, dtype=np.float64)
    b = np.zeros(0) if b is None else np.asarray(b, dtype=np.float64)
    eye = np.eye(n)
    normals = np.vstack([A, eye, eye])
    offsets = np.concatenate([b, np.zeros(n), np.ones(n)])

    best_value, best_x = np.inf, None
    for chosen in combinations(range(normals.shape[0]), n):
        M = normals[list(chosen)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, offsets[list(chosen)])
        if np.any(x < -tol) or np.any(x > 1 + tol):
            continue
        if A.shape[0] and np.any(A @ x > b + tol):
            continue
        if (value := float(c @ x)) < best_value:
            best_value, best_x = value, x
    return best_value, best_x
