"""End-to-end localization and benchmark runs behind the CLI."""
from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import flops
from .beamformer import LeadField, ScanResult, rank_sources, scan_grid
from .covstream import EegWindow, batch_covariance, check_window_params, init_state, scatter, slide
from .errors import DataError, ParameterError
from .millerinv import (DEFAULT_REFRESH, apply_sum, direct_inverse, rank_one_terms,
                        recursive_inverse_slide, symmetric_inverse)
from .report import RunReport
from .simkit import make_leadfield, orientation_error, peak_normalized_error, recon_error

MODES = ("accelerated", "traditional", "both")


@dataclass
class Localization:
    report: RunReport
    accelerated: ScanResult | None
    traditional: ScanResult | None
    window: np.ndarray


def _stages(tally: flops.Tally) -> dict[str, int]:
    return {stage: int(n) for stage, n in sorted(tally.items())}


def _point_rows(leadfield: LeadField, scans: dict[str, ScanResult]) -> list[dict]:
    rows = []
    ranks = {m: {p: r for r, p in enumerate(rank_sources(s))} if len(s) else {}
             for m, s in scans.items()}
    by_point = {m: s.by_point() for m, s in scans.items()}
    for i in range(len(leadfield)):
        row = {"point": i, "position": [float(x) for x in leadfield.positions[i]]}
        for m, scan in scans.items():
            est = by_point[m].get(i)
            row[f"{m}_activity"] = None if est is None else est.activity
            row[f"{m}_rank"] = ranks[m].get(i)
            row[f"{m}_orientation"] = None if est is None else [float(x) for x in est.orientation.vector]
            row[f"{m}_flag"] = scan.flagged.get(i)
        if len(scans) == 2:
            a, t = by_point["accelerated"].get(i), by_point["traditional"].get(i)
            row["orientation_error"] = (None if a is None or t is None else
                                        orientation_error(a.orientation.vector, t.orientation.vector))
        rows.append(row)
    return rows


def compare(acc: ScanResult, trad: ScanResult) -> dict:
    """Agreement metrics between the two recipes on the points both resolved."""
    a, t = acc.by_point(), trad.by_point()
    common = sorted(set(a) & set(t))
    if not common:
        return {"common_points": 0}
    ori = [orientation_error(a[i].orientation.vector, t[i].orientation.vector) for i in common]
    dev = [float(np.max(np.abs(np.abs(a[i].orientation.vector) - np.abs(t[i].orientation.vector))))
           for i in common]
    S_a = np.array([a[i].series for i in common])
    S_l = np.array([t[i].series for i in common])
    return {
        "common_points": len(common),
        "orientation_error_mean": float(np.mean(ori)),
        "orientation_error_max": float(np.max(ori)),
        "orientation_max_abs_deviation": float(np.max(dev)),
        "recon_error": recon_error(S_a, S_l),
        "recon_peak_normalized_error": peak_normalized_error(S_a, S_l),
    }


def localize(window: EegWindow, leadfield: LeadField, mode: str = "both", ns: int | None = None,
             cy: int = 1, ridge: float | str = 0.0, refresh: int | None = DEFAULT_REFRESH,
             workers: int = 1) -> Localization:
    """Stream ``window`` through the sliding estimator and scan the final window.

    The data are centered with the channel means of the first ``ns``
    samples. The accelerated recipe uses the recursively maintained inverse;
    the traditional one inverts the batch covariance of the same final
    window directly. ``ridge="auto"`` uses ``1e-8 tr(C) / k`` with ``C`` the
    covariance of the whole centered recording.
    """
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    data = window.data
    k, n = data.shape
    if leadfield.k != k:
        raise DataError(f"lead field has {leadfield.k} channels, EEG has {k}")
    ns = 4 * k if ns is None else int(ns)
    check_window_params(k, ns, cy)
    if ns > n:
        raise ParameterError(f"window length ns={ns} exceeds the recording length N={n}")
    centered = data - data[:, :ns].mean(axis=1, keepdims=True)
    if ridge == "auto":
        # sized on the whole recording: the first window may be nearly silent
        ridge = 1e-8 * float(np.sum(centered * centered)) / ((n - 1) * k)
    ridge = float(ridge)
    n_slides = (n - ns) // cy
    start = n_slides * cy
    final = centered[:, start:start + ns]

    scans: dict[str, ScanResult] = {}
    flop_doc, timing, counters = {}, {}, {"slides": n_slides, "unused_samples": n - ns - start}
    if mode in ("accelerated", "both"):
        with flops.counting() as init_t:
            t0 = time.perf_counter()
            state = init_state(centered[:, :ns], cy, ridge)
            timing["accelerated_init"] = time.perf_counter() - t0
        with flops.counting() as upd_t:
            t0 = time.perf_counter()
            for s in range(ns, ns + start, cy):
                state, delta = slide(state, centered[:, s:s + cy])
                state = recursive_inverse_slide(state, delta, refresh)
            timing["accelerated_updates"] = time.perf_counter() - t0
        with flops.counting() as scan_t:
            t0 = time.perf_counter()
            scans["accelerated"] = scan_grid(leadfield, state.inverse, final, "accelerated", workers)
            timing["accelerated_scan"] = time.perf_counter() - t0
        counters.update(fallbacks=state.fallbacks, refreshes=state.refreshes,
                        updates_applied=state.updates_applied)
        flop_doc["accelerated"] = {"init": _stages(init_t), "updates": _stages(upd_t),
                                   "scan": _stages(scan_t)}
    if mode in ("traditional", "both"):
        with flops.counting() as cov_t:
            t0 = time.perf_counter()
            C = batch_covariance(final, center=False) + ridge * np.eye(k)
            Rinv = symmetric_inverse(C)
            timing["traditional_covariance"] = time.perf_counter() - t0
        with flops.counting() as scan_t:
            t0 = time.perf_counter()
            scans["traditional"] = scan_grid(leadfield, Rinv, final, "traditional", workers)
            timing["traditional_scan"] = time.perf_counter() - t0
        flop_doc["traditional"] = {"covariance": _stages(cov_t), "scan": _stages(scan_t)}

    rankings = {m: rank_sources(s) if len(s) else [] for m, s in scans.items()}
    metrics: dict = {}
    for m, ranking in rankings.items():
        if ranking:
            metrics[f"{m}_top_point"] = ranking[0]
            metrics[f"{m}_top_position"] = [float(x) for x in leadfield.positions[ranking[0]]]
        metrics[f"{m}_flagged"] = len(scans[m].flagged)
    if mode == "both":
        metrics.update(compare(scans["accelerated"], scans["traditional"]))
        if rankings["accelerated"] and rankings["traditional"]:
            metrics["top_points_agree"] = rankings["accelerated"][0] == rankings["traditional"][0]
    config = {"mode": mode, "ns": ns, "cy": cy, "ridge": ridge, "refresh": refresh or 0,
              "k": k, "n_samples": n, "grid_points": len(leadfield)}
    report = RunReport("localize", config, _point_rows(leadfield, scans), rankings, metrics,
                       counters, flop_doc, timing)
    return Localization(report, scans.get("accelerated"), scans.get("traditional"), final)


def bench(k: int = 32, ns: int | None = None, cy: int = 1, grid_points: int = 64,
          slides: int = 64, seed: int = 0) -> RunReport:
    """Multiply-add and wall-time comparison of recursive vs recomputed updates.

    The stream is seeded white noise (well conditioned); periodic inverse
    refresh is disabled so the update figures are pure rank-one costs.
    """
    if k < 4 or grid_points < 1 or slides < 0:
        raise ParameterError("need k >= 4, grid_points >= 1, slides >= 0")
    ns = 4 * k if ns is None else int(ns)
    check_window_params(k, ns, cy)
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((k, ns + slides * cy))
    leadfield = make_leadfield(np.zeros((k, 3)), rng.standard_normal((grid_points, 3)),
                               "random-fullrank", seed)
    timing: dict[str, float] = {}

    with flops.counting() as init_t:
        t0 = time.perf_counter()
        state = init_state(data[:, :ns], cy)
        timing["init"] = time.perf_counter() - t0

    update_total, recompute_total, column_total = 0, 0, 0
    t_update = t_recompute = 0.0
    for j in range(slides):
        block = data[:, ns + j * cy:ns + (j + 1) * cy]
        with flops.counting() as upd:
            t0 = time.perf_counter()
            new_state, delta = slide(state, block)
            new_state = recursive_inverse_slide(new_state, delta, refresh=None)
            t_update += time.perf_counter() - t0
        update_total += upd.total
        window = new_state.window()
        with flops.counting() as rec:
            t0 = time.perf_counter()
            direct_inverse(scatter(window) / (ns - 1))
            t_recompute += time.perf_counter() - t0
        recompute_total += rec.total
        if j == 0:
            with flops.counting() as col:
                apply_sum(state.inverse, terms=rank_one_terms(delta.matrix / (ns - 1)))
            column_total = col.total + 2 * flops.gram(k, cy)
        state = new_state
    timing["updates"] = t_update
    timing["recompute"] = t_recompute

    window = state.window()
    scan_counts = {}
    for mode in ("accelerated", "traditional"):
        with flops.counting() as sc:
            t0 = time.perf_counter()
            scan_grid(leadfield, state.inverse, window, mode)
            timing[f"scan_{mode}"] = time.perf_counter() - t0
        scan_counts[mode] = _stages(sc)
    scalar = scan_counts["accelerated"].get("reconstruction", 0)
    vector = scan_counts["traditional"].get("reconstruction", 0)
    ratio = Fraction(scalar, vector)

    doc = {"init": _stages(init_t), "reconstruction": {
        "scalar": scalar, "vector": vector, "ratio": float(ratio),
        "ratio_exact": f"{ratio.numerator}/{ratio.denominator}",
        "reduction": float(1 - ratio)},
        "scan": scan_counts, "update": {}}
    if slides:
        doc["update"] = {
            "recursive_per_slide": update_total / slides,
            "recompute_per_slide": recompute_total / slides,
            "ratio": update_total / recompute_total,
            "column_split_per_slide": column_total,
            "column_split_ratio": column_total * slides / recompute_total,
        }
    if t_recompute > 0 and t_update > 0:
        timing["update_speedup"] = t_recompute / t_update
    config = {"k": k, "ns": ns, "cy": cy, "grid_points": grid_points, "slides": slides,
              "seed": seed}
    counters = {"slides": slides, "fallbacks": state.fallbacks}
    return RunReport("bench", config, counters=counters, flops=doc, timing=timing)
