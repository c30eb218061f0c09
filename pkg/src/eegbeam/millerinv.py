"""Recursive inverse maintenance with rank-one (Miller) updates.

For a rank-one ``E`` the inverse of ``C + E`` follows from ``C^-1``::

    (C + E)^-1 = C^-1 - v C^-1 E C^-1,    v = 1 / (1 + tr(C^-1 E))

A general update ``H`` is split into rank-one terms and folded in one term
at a time. Two splits are supported:

* column terms (:func:`rank_one_terms`): term ``i`` keeps column ``i`` of
  ``H``. Works for any ``H`` but a dense ``H`` yields ``k`` terms.
* sample terms (:func:`sample_terms`): a slide changes the scatter by
  ``+x x^T`` per new sample and ``-x x^T`` per evicted one, so a block of
  ``cy`` samples gives ``2 cy`` symmetric terms. This is what makes a slide
  cost O(k^2 cy) instead of O(k^3).
"""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from . import flops
from .covstream import CovarianceState, ScatterDelta, covariance, init_state, slide
from .errors import SingularMatrixError, SingularUpdateError

PIVOT_RTOL = 1e-10
SINGULAR_RTOL = 1e-13
DEFAULT_REFRESH = 4096


@dataclass(frozen=True)
class RankOneTerm:
    """A rank-one matrix ``E``.

    Column form (``index`` set): ``E`` is zero except for column ``index``,
    which equals ``h``. Dyad form (``index`` is None): ``E = sign * h h^T``.
    """

    h: np.ndarray
    index: int | None = None
    sign: float = 1.0

    def matrix(self) -> np.ndarray:
        k = self.h.shape[0]
        if self.index is None:
            return self.sign * np.outer(self.h, self.h)
        E = np.zeros((k, k))
        E[:, self.index] = self.h
        return E


def rank_one_terms(H) -> list[RankOneTerm]:
    """Split ``H`` into column terms, skipping all-zero columns."""
    H = np.asarray(H, dtype=float)
    return [RankOneTerm(H[:, i].copy(), index=i)
            for i in range(H.shape[1]) if np.any(H[:, i])]


def sample_terms(delta: ScatterDelta, scale: float = 1.0) -> list[RankOneTerm]:
    """Dyad terms of ``scale * delta.matrix``: added samples first, then evicted."""
    root = np.sqrt(scale)
    terms = [RankOneTerm(root * x, sign=1.0) for x in delta.added.T]
    terms += [RankOneTerm(root * x, sign=-1.0) for x in delta.evicted.T]
    return terms


def miller_step(Cinv: np.ndarray, term: RankOneTerm, pivot_rtol: float = PIVOT_RTOL) -> np.ndarray:
    """Inverse of ``C + E`` given ``Cinv = C^-1``, in O(k^2).

    Raises
    ------
    SingularUpdateError
        ``|1 + tr(C^-1 E)|`` is below ``pivot_rtol * (1 + ||C^-1 E||_F)``.
    """
    k = Cinv.shape[0]
    x = Cinv @ term.h
    if term.index is None:
        trace = term.sign * float(term.h @ x)
        size = float(np.linalg.norm(x) * np.linalg.norm(term.h))
        flops.add("inverse", flops.matvec(k, k) + k)
    else:
        trace = float(x[term.index])
        size = float(np.linalg.norm(x))
        flops.add("inverse", flops.matvec(k, k))
    pivot = 1.0 + trace
    if abs(pivot) <= pivot_rtol * (1.0 + size):
        raise SingularUpdateError(f"rank-one update pivot {pivot:.3e} vanished")
    flops.add("inverse", k * k)
    if term.index is None:
        # C^-1 E C^-1 = sign * x x^T for symmetric C^-1; keeps the result symmetric.
        return Cinv - (term.sign / pivot) * np.outer(x, x)
    return Cinv - np.outer(x / pivot, Cinv[term.index, :])


def apply_sum(Cinv: np.ndarray, H=None, terms: Iterable[RankOneTerm] | None = None,
              pivot_rtol: float = PIVOT_RTOL) -> np.ndarray:
    """Inverse of ``G + H`` given ``Cinv = G^-1``, one rank-one term at a time.

    Either ``H`` (split into column terms) or an explicit ``terms`` sequence
    must be given. A vanishing pivot raises :class:`SingularUpdateError`
    whose ``term_index`` names the failing position in the term sequence.
    """
    if terms is None:
        if H is None:
            raise TypeError("apply_sum needs H or terms")
        terms = rank_one_terms(H)
    result = np.asarray(Cinv, dtype=float)
    for j, term in enumerate(terms):
        try:
            result = miller_step(result, term, pivot_rtol)
        except SingularUpdateError as exc:
            raise SingularUpdateError(f"term {j}: {exc}", term_index=j) from None
    return result


def direct_inverse(C) -> np.ndarray:
    """Inverse by LU with partial pivoting.

    Raises
    ------
    SingularMatrixError
        A pivot of the factorization is below ``1e-13 * ||C||_F``.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"direct_inverse needs a square matrix, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise SingularMatrixError("matrix has non-finite entries")
    k = C.shape[0]
    norm = np.linalg.norm(C)
    with warnings.catch_warnings():
        # singularity is judged by the pivot test below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(C, check_finite=False)
    smallest = float(np.min(np.abs(np.diag(lu)))) if k else 0.0
    if norm == 0.0 or smallest <= SINGULAR_RTOL * norm:
        raise SingularMatrixError(
            f"matrix is singular to working precision (pivot {smallest:.3e}, "
            f"||C||_F {norm:.3e}); increase the ridge")
    flops.add("inverse", flops.lu_inverse(k))
    return scipy.linalg.lu_solve((lu, piv), np.eye(k), check_finite=False)


def symmetric_inverse(C) -> np.ndarray:
    Cinv = direct_inverse(C)
    return 0.5 * (Cinv + Cinv.T)


def recursive_inverse_slide(state: CovarianceState, delta, refresh: int | None = DEFAULT_REFRESH,
                            pivot_rtol: float = PIVOT_RTOL) -> CovarianceState:
    """Bring ``state.inverse`` up to date after :func:`covstream.slide`.

    ``state`` must already hold the post-slide scatter while its inverse
    still refers to the previous window. ``delta`` is the slide's
    :class:`ScatterDelta` (sample terms, O(k^2 cy)) or a plain scatter-unit
    matrix (column terms, O(k^3)). Either is rescaled to covariance units.

    On a vanishing pivot the inverse is recomputed directly and
    ``fallbacks`` is incremented. Every ``refresh`` updates the inverse is
    also recomputed directly to flush accumulated rounding; ``None`` or 0
    disables this.
    """
    scale = 1.0 / (state.ns - 1)
    if isinstance(delta, ScatterDelta):
        terms: Sequence[RankOneTerm] = sample_terms(delta, scale)
    else:
        terms = rank_one_terms(np.asarray(delta, dtype=float) * scale)
    fallbacks, refreshes, since = state.fallbacks, state.refreshes, state.since_refresh + 1
    if refresh and since >= refresh:
        inverse = _recompute(state)
        refreshes += 1
        since = 0
    else:
        try:
            inverse = apply_sum(state.inverse, terms=terms, pivot_rtol=pivot_rtol)
        except SingularUpdateError:
            fallbacks += 1
            inverse = _recompute(state, fallbacks=fallbacks)
            since = 0
    return dataclasses.replace(state, inverse=inverse, inverse_valid=True,
                               updates_applied=state.updates_applied + 1,
                               fallbacks=fallbacks, refreshes=refreshes, since_refresh=since)


def _recompute(state: CovarianceState, fallbacks: int | None = None) -> np.ndarray:
    try:
        return symmetric_inverse(covariance(state))
    except SingularMatrixError as exc:
        n = state.fallbacks if fallbacks is None else fallbacks
        raise SingularMatrixError(
            f"direct inversion after {n} fallback(s) failed at window start "
            f"{state.window_start}: {exc}") from None


def run_stream(data, ns: int, cy: int, ridge: float = 0.0,
               refresh: int | None = DEFAULT_REFRESH) -> CovarianceState:
    """Initialize on the first ``ns`` columns and slide over every complete block.

    Trailing samples that do not fill a block are left unused.
    """
    data = np.asarray(data, dtype=float)
    state = init_state(data[:, :ns], cy, ridge)
    for start in range(ns, data.shape[1] - cy + 1, cy):
        state, delta = slide(state, data[:, start:start + cy])
        state = recursive_inverse_slide(state, delta, refresh)
    return state
