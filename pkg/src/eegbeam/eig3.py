"""Closed-form eigendecomposition of real symmetric 3x3 matrices.

Eigenvalues come from the trigonometric solution of the characteristic
cubic. Eigenvectors are built from the null space of ``B = A - lambda*I``
by a case dispatch: diagonal matrices, matrices with a single active 2x2
block, then nine general cases. Each general case fixes one component of
the eigenvector to 1, solves two rows of ``B v = 0`` for a second component
by Cramer's rule and uses the remaining row for the third.

No iteration is involved, which makes the per-point orientation search of
the beamformer a fixed, small amount of arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import flops

# |subdeterminant| must exceed this times ||A||_F**2, and the pivot this
# times ||A||_F, for a general case to be eligible. Relative thresholds keep
# the case choice invariant under scaling of A.
GUARD_RTOL = 1e-12
# Rows of B whose 2x2 minors all fall below this fraction of the largest
# squared row norm span a single direction: lambda is (numerically) repeated.
RANK_ONE_RTOL = 1e-10
# A close pair of eigenvalues (gap below this times p) is recomputed from
# the 2x2 problem left after deflating the well-separated eigenvalue.
CLUSTER_RTOL = 1e-4

# Fixed multiply-add cost of the closed-form path, used for flop reports.
EIGVALS_MACS = 30
EIGVEC_MACS = 60


@dataclass(frozen=True)
class Sym3:
    """The six unique entries of a symmetric 3x3 matrix."""

    a11: float
    a22: float
    a33: float
    a12: float
    a13: float
    a23: float

    def __post_init__(self):
        for name in ("a11", "a22", "a33", "a12", "a13", "a23"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"Sym3 entry {name} is not finite: {value}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_matrix(cls, m) -> "Sym3":
        """Build from a 3x3 array; off-diagonal pairs are averaged."""
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
        return cls(m[0, 0], m[1, 1], m[2, 2],
                   0.5 * (m[0, 1] + m[1, 0]),
                   0.5 * (m[0, 2] + m[2, 0]),
                   0.5 * (m[1, 2] + m[2, 1]))

    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12, self.a13],
                         [self.a12, self.a22, self.a23],
                         [self.a13, self.a23, self.a33]])

    @property
    def frobenius(self) -> float:
        return math.sqrt(self.a11 ** 2 + self.a22 ** 2 + self.a33 ** 2
                         + 2.0 * (self.a12 ** 2 + self.a13 ** 2 + self.a23 ** 2))

    def is_diagonal(self) -> bool:
        return self.a12 == 0.0 and self.a13 == 0.0 and self.a23 == 0.0


SymLike = Union[Sym3, np.ndarray]


def as_sym3(A: SymLike) -> Sym3:
    return A if isinstance(A, Sym3) else Sym3.from_matrix(A)


@dataclass(frozen=True)
class EigenSystem3:
    """Ascending eigenvalues with matching unit eigenvectors (columns).

    ``degenerate[i]`` is True when the eigenvector for ``eigenvalues[i]``
    was not uniquely determined (repeated eigenvalue).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    degenerate: tuple[bool, bool, bool]


def canonical_sign(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so that its largest-magnitude component is non-negative.

    Ties go to the first component reaching the maximum magnitude.
    """
    j = int(np.argmax(np.abs(v)))
    return -v if v[j] < 0 else v


def _cubic_roots(s: Sym3) -> tuple[float, float, float, float]:
    """Trigonometric roots (ascending) plus the scale ``p`` of the shifted matrix."""
    p1 = s.a12 ** 2 + s.a13 ** 2 + s.a23 ** 2
    q = (s.a11 + s.a22 + s.a33) / 3.0
    d1, d2, d3 = s.a11 - q, s.a22 - q, s.a33 - q
    p = math.sqrt((d1 * d1 + d2 * d2 + d3 * d3 + 2.0 * p1) / 6.0)
    if p == 0.0:
        return q, q, q, 0.0
    b11, b22, b33 = d1 / p, d2 / p, d3 / p
    b12, b13, b23 = s.a12 / p, s.a13 / p, s.a23 / p
    det_b = (b11 * (b22 * b33 - b23 * b23)
             - b12 * (b12 * b33 - b23 * b13)
             + b13 * (b12 * b23 - b22 * b13))
    r = min(1.0, max(-1.0, 0.5 * det_b))
    phi = math.acos(r) / 3.0
    hi = q + 2.0 * p * math.cos(phi)
    lo = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    mid = 3.0 * q - hi - lo
    lo, mid, hi = sorted((lo, mid, hi))
    return lo, mid, hi, p


def _deflated_pair(s: Sym3, far: float) -> tuple[float, float]:
    """Eigenvalues orthogonal to the eigenvector of the isolated root ``far``."""
    v, _ = eigvec_sym3(s, far)
    j = int(np.argmin(np.abs(v)))
    e = np.zeros(3)
    e[j] = 1.0
    u1 = np.cross(v, e)
    u1 /= np.linalg.norm(u1)
    u2 = np.cross(v, u1)
    A = s.matrix()
    m11 = u1 @ A @ u1
    m22 = u2 @ A @ u2
    m12 = u1 @ A @ u2
    mid = 0.5 * (m11 + m22)
    rad = math.hypot(0.5 * (m11 - m22), m12)
    return mid - rad, mid + rad


def eigvals_sym3(A: SymLike) -> tuple[float, float, float]:
    """Eigenvalues of a symmetric 3x3 matrix, ascending."""
    s = as_sym3(A)
    flops.add("orientation", EIGVALS_MACS)
    if s.is_diagonal():
        lo, mid, hi = sorted((s.a11, s.a22, s.a33))
        return lo, mid, hi
    lo, mid, hi, p = _cubic_roots(s)
    if p == 0.0:
        return lo, mid, hi
    # The cubic loses accuracy for close roots; the 2x2 remainder does not.
    if mid - lo < CLUSTER_RTOL * p:
        lo, mid = _deflated_pair(s, hi)
    elif hi - mid < CLUSTER_RTOL * p:
        mid, hi = _deflated_pair(s, lo)
    return lo, mid, hi


def _unit(x: float, y: float, z: float) -> np.ndarray:
    v = np.array([x, y, z])
    return v / np.linalg.norm(v)


def _general_cases(b11, b22, b33, b12, b13, b23):
    """(subdeterminant, pivot, builder) for every general case, listed order.

    The first three fix the third component and solve for the second
    component first; the next three fix the third and solve for the first;
    the last three fix the second component.
    """
    return (
        (b12 * b12 - b11 * b22, b13,
         lambda d: _fix3_q((b11 * b23 - b13 * b12) / d, b23, b33, b13)),
        (b12 * b13 - b11 * b23, b12,
         lambda d: _fix3_q((b11 * b33 - b13 * b13) / d, b22, b23, b12)),
        (b22 * b13 - b12 * b23, b11,
         lambda d: _fix3_q((b12 * b33 - b23 * b13) / d, b12, b13, b11)),
        (b11 * b22 - b12 * b12, b23,
         lambda d: _fix3_p((b12 * b23 - b13 * b22) / d, b13, b33, b23)),
        (b11 * b23 - b12 * b13, b22,
         lambda d: _fix3_p((b12 * b33 - b13 * b23) / d, b12, b23, b22)),
        (b12 * b23 - b22 * b13, b12,
         lambda d: _fix3_p((b22 * b33 - b23 * b23) / d, b11, b13, b12)),
        (b11 * b23 - b13 * b12, b33,
         lambda d: _fix2_p((b13 * b22 - b12 * b23) / d, b13, b23, b33)),
        (b11 * b33 - b13 * b13, b23,
         lambda d: _fix2_p((b13 * b23 - b12 * b33) / d, b12, b22, b23)),
        (b12 * b33 - b23 * b13, b13,
         lambda d: _fix2_p((b23 * b23 - b22 * b33) / d, b11, b12, b13)),
    )


def _fix3_q(q, c, c0, pivot):
    # v = (P, Q, 1) with P from the remaining row: pivot*P + c*Q + c0 = 0
    return _unit(-(c * q + c0) / pivot, q, 1.0)


def _fix3_p(p, c, c0, pivot):
    # v = (P, Q, 1) with Q from the remaining row: c*P + pivot*Q + c0 = 0
    return _unit(p, -(c * p + c0) / pivot, 1.0)


def _fix2_p(p, c, c0, pivot):
    # v = (P, 1, R) with R from the remaining row: c*P + c0 + pivot*R = 0
    return _unit(p, 1.0, -(c * p + c0) / pivot)


def _block_vector(bjj, bjk, bkk) -> np.ndarray:
    """Null vector of the 2x2 block [[bjj, bjk], [bjk, bkk]], unnormalized."""
    first = np.array([-bjk, bjj])
    second = np.array([-bkk, bjk])
    return first if first @ first >= second @ second else second


def _residual(A: np.ndarray, lam: float, v: np.ndarray) -> float:
    return float(np.linalg.norm(A @ v - lam * v))


def _orthogonal_to(row: np.ndarray) -> np.ndarray:
    j = int(np.argmin(np.abs(row)))
    e = np.zeros(3)
    e[j] = 1.0
    v = np.cross(row, e)
    return v / np.linalg.norm(v)


def _rank_deficient(rows: np.ndarray, scale: float) -> tuple[np.ndarray, bool]:
    """Null vector when the general cases are unusable; always flagged."""
    crosses = (np.cross(rows[0], rows[1]), np.cross(rows[0], rows[2]),
               np.cross(rows[1], rows[2]))
    norms = [float(np.linalg.norm(c)) for c in crosses]
    row_norms = np.linalg.norm(rows, axis=1)
    big = float(row_norms.max())
    best = int(np.argmax(norms))
    if norms[best] > RANK_ONE_RTOL * big * big and norms[best] > GUARD_RTOL * scale ** 2:
        return crosses[best] / norms[best], True
    if big > GUARD_RTOL * scale:
        return _orthogonal_to(rows[int(np.argmax(row_norms))]), True
    return np.array([1.0, 0.0, 0.0]), True


def eigvec_sym3(A: SymLike, lam: float) -> tuple[np.ndarray, bool]:
    """Unit eigenvector of ``A`` for eigenvalue ``lam``.

    Returns ``(v, degenerate)``. ``degenerate`` is True when ``lam`` is a
    repeated eigenvalue (any unit vector of its eigenspace is then valid and
    a deterministic one is returned) or when no closed-form case applied.
    The sign of ``v`` is canonical, see :func:`canonical_sign`.
    """
    s = as_sym3(A)
    lam = float(lam)
    flops.add("orientation", EIGVEC_MACS)
    scale = s.frobenius or 1.0
    b11, b22, b33 = s.a11 - lam, s.a22 - lam, s.a33 - lam
    b12, b13, b23 = s.a12, s.a13, s.a23

    if s.is_diagonal():
        diffs = np.abs([b11, b22, b33])
        j = int(np.argmin(diffs))
        v = np.zeros(3)
        v[j] = 1.0
        repeated = int(np.sum(diffs <= 1e-10 * scale)) > 1
        return v, repeated

    zeros = (b12 == 0.0, b13 == 0.0, b23 == 0.0)
    if sum(zeros) == 2:
        # One active 2x2 block plus an isolated diagonal entry.
        if b23 != 0.0:
            iso, (j, k), block = 0, (1, 2), (b22, b23, b33)
        elif b13 != 0.0:
            iso, (j, k), block = 1, (0, 2), (b11, b13, b33)
        else:
            iso, (j, k), block = 2, (0, 1), (b11, b12, b22)
        w = _block_vector(*block)
        in_block = np.zeros(3)
        in_block[[j, k]] = w / np.linalg.norm(w)
        isolated = np.zeros(3)
        isolated[iso] = 1.0
        M = s.matrix()
        r_block = _residual(M, lam, in_block)
        r_iso = _residual(M, lam, isolated)
        tol = 1e-9 * scale
        repeated = r_block <= tol and r_iso <= tol
        v = isolated if r_iso < r_block else in_block
        return canonical_sign(v), repeated

    rows = np.array([[b11, b12, b13], [b12, b22, b23], [b13, b23, b33]])
    cases = _general_cases(b11, b22, b33, b12, b13, b23)
    row_max = float(np.max(np.sum(rows * rows, axis=1)))
    det_max = max(abs(c[0]) for c in cases)
    if det_max <= RANK_ONE_RTOL * row_max:
        v, flag = _rank_deficient(rows, scale)
        return canonical_sign(v), flag

    det_tol = GUARD_RTOL * scale * scale
    piv_tol = GUARD_RTOL * scale
    best, best_guard = None, 0.0
    for det, pivot, build in cases:
        if abs(det) > det_tol and abs(pivot) > piv_tol:
            guard = abs(det * pivot)
            if guard > best_guard:
                best, best_guard = (det, build), guard
    if best is None:
        v, flag = _rank_deficient(rows, scale)
        return canonical_sign(v), flag
    det, build = best
    return canonical_sign(build(det)), False


def smallest_eigvec(A: SymLike) -> tuple[np.ndarray, bool]:
    """Unit eigenvector of the smallest eigenvalue, with its degeneracy flag."""
    s = as_sym3(A)
    lo, _, _ = eigvals_sym3(s)
    return eigvec_sym3(s, lo)


def eigh_sym3(A: SymLike) -> EigenSystem3:
    s = as_sym3(A)
    lams = eigvals_sym3(s)
    vecs, flags = [], []
    for lam in lams:
        v, flag = eigvec_sym3(s, lam)
        vecs.append(v)
        flags.append(flag)
    return EigenSystem3(np.array(lams), np.column_stack(vecs), tuple(flags))
