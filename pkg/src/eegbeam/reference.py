"""Iterative reference eigensolver for the traditional orientation path.

Cyclic Jacobi rotations on a symmetric 3x3 matrix until the off-diagonal
mass is negligible. Slower than the closed form in :mod:`eegbeam.eig3`
and with a data-dependent cost, which is the point of comparison.
"""
from __future__ import annotations

import math

import numpy as np

from . import flops
from .eig3 import canonical_sign

# One rotation updates two rows and two columns of A and two columns of V.
_MACS_PER_ROTATION = 4 * 3 + 2 * 3 + 8


def jacobi_eigh3(A, tol: float = 1e-15, max_sweeps: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and eigenvector columns of symmetric ``A``."""
    a = np.array(A, dtype=float)
    v = np.eye(3)
    scale = np.linalg.norm(a)
    rotations = 0
    for _ in range(max_sweeps):
        off = math.sqrt(a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2)
        if off <= tol * scale:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            if a[p, q] == 0.0:
                continue
            theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
            t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            rot = np.eye(3)
            rot[p, p] = rot[q, q] = c
            rot[p, q] = s
            rot[q, p] = -s
            a = rot.T @ a @ rot
            a[p, q] = a[q, p] = 0.0
            v = v @ rot
            rotations += 1
    flops.add("orientation", rotations * _MACS_PER_ROTATION)
    order = np.argsort(np.diag(a), kind="stable")
    return np.diag(a)[order], v[:, order]


def reference_smallest_eigvec(A) -> tuple[np.ndarray, bool]:
    """Smallest eigenvector via Jacobi; flagged when the two smallest coincide."""
    lams, vecs = jacobi_eigh3(A)
    scale = 1.0 + np.linalg.norm(A)
    return canonical_sign(vecs[:, 0]), bool(lams[1] - lams[0] <= 1e-8 * scale)
