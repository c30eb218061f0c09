"""Synthetic EEG scenes and agreement metrics.

The forward model is a current dipole in an infinite homogeneous conductor
of unit conductivity: the potential at electrode ``e`` from a unit dipole at
``p`` along axis ``a`` is ``(e - p)_a / (4 pi |e - p|^3)``. Crude next to a
layered head model, but it has the right dipolar geometry and is cheap.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .beamformer import LeadField, RANK_RTOL
from .covstream import EegWindow
from .errors import DataError, ParameterError

MIN_ELECTRODE_DISTANCE = 1e-3


@dataclass(frozen=True)
class DipoleScene:
    positions: np.ndarray       # (m, 3)
    orientations: np.ndarray    # (m, 3), unit rows
    waveforms: np.ndarray       # (m, N)
    noise_sigma: float = 0.0
    seed: int = 0
    n_samples: int | None = None
    sample_rate: float | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        ori = np.asarray(self.orientations, dtype=float).reshape(-1, 3)
        wav = np.asarray(self.waveforms, dtype=float)
        m = pos.shape[0]
        if wav.ndim == 1 and m <= 1:
            wav = wav.reshape(m, -1)
        if ori.shape[0] != m or wav.ndim != 2 or wav.shape[0] != m:
            raise DataError(f"scene needs matching sources: {m} positions, "
                            f"{ori.shape[0]} orientations, waveforms {wav.shape}")
        if m and np.any(np.abs(np.linalg.norm(ori, axis=1) - 1.0) > 1e-9):
            raise DataError("source orientations must be unit vectors")
        if self.noise_sigma < 0 or not math.isfinite(self.noise_sigma):
            raise DataError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        n = self.n_samples if self.n_samples is not None else wav.shape[1]
        if m and wav.shape[1] != n:
            raise DataError(f"waveforms have {wav.shape[1]} samples, scene has {n}")
        if n < 1:
            raise DataError("scene needs at least one sample")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "orientations", ori)
        object.__setattr__(self, "waveforms", wav.reshape(m, n))
        object.__setattr__(self, "n_samples", int(n))


# -- geometry ---------------------------------------------------------------

def sphere_electrodes(count: int, radius: float = 0.1, cap: float = -0.3) -> np.ndarray:
    """``count`` points spread over the part of a sphere with ``z >= cap * radius``."""
    i = np.arange(count) + 0.5
    z = 1.0 - (1.0 - cap) * i / count
    rho = np.sqrt(1.0 - z * z)
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    return radius * np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def cube_grid(n: int, extent: float) -> np.ndarray:
    """``n**3`` points on a regular cube spanning ``[-extent, extent]`` per axis."""
    axis = np.linspace(-extent, extent, n)
    x, y, z = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.column_stack([x.ravel(), y.ravel(), z.ravel()])


def make_leadfield(electrodes, grid, model: str = "homogeneous-dipole",
                   seed: int = 0) -> LeadField:
    """Lead field for every grid point.

    Parameters
    ----------
    electrodes : array, shape (k, 3)
    grid : array, shape (P, 3)
    model : {"homogeneous-dipole", "random-fullrank"}
        ``random-fullrank`` draws seeded standard-normal ``k x 3`` gains and
        redraws any that fail the rank guard.
    """
    electrodes = np.asarray(electrodes, dtype=float).reshape(-1, 3)
    grid = np.asarray(grid, dtype=float).reshape(-1, 3)
    k = electrodes.shape[0]
    if k < 4:
        raise ParameterError(f"need at least 4 electrodes, got {k}")
    if not (np.all(np.isfinite(electrodes)) and np.all(np.isfinite(grid))):
        raise DataError("electrode and grid positions must be finite")
    if model == "homogeneous-dipole":
        diff = electrodes[None, :, :] - grid[:, None, :]          # (P, k, 3)
        dist = np.linalg.norm(diff, axis=2)
        if dist.size and dist.min() < MIN_ELECTRODE_DISTANCE:
            raise ParameterError("a grid point lies on an electrode (closer than 1 mm)")
        gains = diff / (4.0 * math.pi * dist[:, :, None] ** 3)
    elif model == "random-fullrank":
        rng = np.random.default_rng(seed)
        gains = np.empty((grid.shape[0], k, 3))
        for p in range(grid.shape[0]):
            while True:
                L = rng.standard_normal((k, 3))
                sv = np.linalg.svd(L, compute_uv=False)
                if sv[-1] > RANK_RTOL * sv[0]:
                    break
            gains[p] = L
    else:
        raise ParameterError(f"unknown lead field model {model!r}")
    return LeadField(grid, gains)


def grid_index(leadfield: LeadField, position, atol: float = 1e-9) -> int:
    d = np.linalg.norm(leadfield.positions - np.asarray(position, dtype=float), axis=1)
    i = int(np.argmin(d))
    if d[i] > atol:
        raise DataError(f"source position {list(position)} is not a grid point")
    return i


def simulate_eeg(leadfield: LeadField, scene: DipoleScene) -> EegWindow:
    """``Y = sum_j L(p_j) eta_j s_j(t) + noise`` with seeded white Gaussian noise."""
    Y = np.zeros((leadfield.k, scene.n_samples))
    for pos, eta, s in zip(scene.positions, scene.orientations, scene.waveforms):
        L = leadfield.gains[grid_index(leadfield, pos)]
        Y += np.outer(L @ eta, s)
    if scene.noise_sigma > 0:
        rng = np.random.default_rng((scene.seed, 1))
        Y += rng.normal(0.0, scene.noise_sigma, size=Y.shape)
    return EegWindow(Y, scene.sample_rate)


def noise_sigma_for_snr(leadfield: LeadField, scene: DipoleScene, snr_db: float) -> float:
    """Per-channel noise level giving mean signal power / noise power = ``snr_db``."""
    clean = simulate_eeg(leadfield, DipoleScene(scene.positions, scene.orientations,
                                                scene.waveforms, 0.0, scene.seed))
    power = float(np.mean(clean.data ** 2))
    return math.sqrt(power / 10.0 ** (snr_db / 10.0))


# -- waveforms and scene files ------------------------------------------------

def waveform(spec: dict[str, Any], n_samples: int, sample_rate: float,
             base: Path | None = None) -> np.ndarray:
    """Waveform from ``{"kind": "sine"|"burst"|"file", "params": {...}}``.

    sine: ``freq`` (Hz), ``amplitude`` (1), ``phase`` (0 rad).
    burst: Gaussian-windowed sine with ``freq``, ``amplitude``, ``center`` (s,
    default mid-record) and ``width`` (s, default a tenth of the record).
    file: ``path`` to whitespace/comma separated values, at least ``n_samples``.
    """
    kind = spec.get("kind")
    params = spec.get("params", {})
    t = np.arange(n_samples) / sample_rate
    if kind == "sine":
        return params.get("amplitude", 1.0) * np.sin(
            2 * math.pi * params.get("freq", 10.0) * t + params.get("phase", 0.0))
    if kind == "burst":
        duration = n_samples / sample_rate
        center = params.get("center", duration / 2)
        width = params.get("width", duration / 10)
        envelope = np.exp(-0.5 * ((t - center) / width) ** 2)
        return params.get("amplitude", 1.0) * envelope * np.sin(
            2 * math.pi * params.get("freq", 10.0) * t + params.get("phase", 0.0))
    if kind == "file":
        path = Path(params["path"])
        if base is not None and not path.is_absolute():
            path = base / path
        values = np.array(path.read_text().replace(",", " ").split(), dtype=float)
        if values.size < n_samples:
            raise DataError(f"waveform file {path} has {values.size} samples, need {n_samples}")
        return values[:n_samples]
    raise DataError(f"unknown waveform kind {kind!r}")


@dataclass(frozen=True)
class SceneConfig:
    """A parsed scene file: geometry plus the dipole scene on it."""

    electrodes: np.ndarray
    grid: np.ndarray
    scene: DipoleScene
    model: str = "homogeneous-dipole"

    def leadfield(self) -> LeadField:
        return make_leadfield(self.electrodes, self.grid, self.model, self.scene.seed)


def _positions(value, what: str) -> np.ndarray:
    if isinstance(value, dict):
        kind = value.get("kind")
        if what == "electrodes" and kind == "sphere":
            return sphere_electrodes(int(value["count"]), float(value.get("radius", 0.1)),
                                     float(value.get("cap", -0.3)))
        if what == "grid" and kind == "cube":
            return cube_grid(int(value["n"]), float(value["extent"]))
        raise DataError(f"unknown {what} generator {value!r}")
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DataError(f"{what} must be a list of [x, y, z] positions")
    return arr


def parse_scene(doc: dict[str, Any], base: Path | None = None) -> SceneConfig:
    """Build a :class:`SceneConfig` from a decoded scene JSON document.

    Required: ``electrodes``, ``grid``, ``sources``. Optional: ``noise_sigma``
    (0), ``seed`` (0), ``n_samples`` (256), ``sample_rate`` (256 Hz),
    ``model`` ("homogeneous-dipole"). A source ``position`` may be given as
    coordinates or as ``{"index": i}`` into the grid; orientations are
    normalized.
    """
    try:
        electrodes = _positions(doc["electrodes"], "electrodes")
        grid = _positions(doc["grid"], "grid")
        n = int(doc.get("n_samples", 256))
        rate = float(doc.get("sample_rate", 256.0))
        positions, orientations, waves = [], [], []
        for src in doc["sources"]:
            pos = src["position"]
            if isinstance(pos, dict):
                pos = grid[int(pos["index"])]
            ori = np.asarray(src["orientation"], dtype=float)
            if ori.shape != (3,) or not np.linalg.norm(ori) > 0:
                raise DataError(f"bad orientation {src['orientation']!r}")
            positions.append(np.asarray(pos, dtype=float))
            orientations.append(ori / np.linalg.norm(ori))
            waves.append(waveform(src["waveform"], n, rate, base))
        scene = DipoleScene(np.array(positions).reshape(-1, 3),
                            np.array(orientations).reshape(-1, 3),
                            np.array(waves).reshape(len(waves), n),
                            float(doc.get("noise_sigma", 0.0)), int(doc.get("seed", 0)),
                            n, rate)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"malformed scene: {exc!r}") from None
    return SceneConfig(electrodes, grid, scene, doc.get("model", "homogeneous-dipole"))


def load_scene(path) -> SceneConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"scene file {path} is not valid JSON: {exc}") from None
    return parse_scene(doc, path.parent)


# -- metrics -----------------------------------------------------------------

def orientation_error(est, ref) -> float:
    """Sign-blind orientation disagreement in [0, 1].

    ``sum_c ||est_c| - |ref_c|| / (3 max_c ||est_c| - |ref_c||)``, defined as 0
    when the absolute components agree exactly.
    """
    d = np.abs(np.abs(np.asarray(est, dtype=float)) - np.abs(np.asarray(ref, dtype=float)))
    if d.shape != (3,) or not np.all(np.isfinite(d)):
        raise DataError("orientation_error needs two finite 3-vectors")
    top = d.max()
    return 0.0 if top == 0.0 else float(d.sum() / (3.0 * top))


def recon_error(S_a, S_l) -> float:
    """Series disagreement in [0, 1]: mean over the max of ``||S_a| - |S_l||``.

    ``N = rows * cols`` elements; 0 when the absolute values agree exactly.
    """
    a = np.atleast_2d(np.asarray(S_a, dtype=float))
    b = np.atleast_2d(np.asarray(S_l, dtype=float))
    if a.shape != b.shape:
        raise DataError(f"shape mismatch {a.shape} vs {b.shape}")
    d = np.abs(np.abs(a) - np.abs(b))
    top = d.max() if d.size else 0.0
    return 0.0 if top == 0.0 else float(d.sum() / (d.size * top))


def peak_normalized_error(S_a, S_l) -> float:
    """``sum ||S_a| - |S_l|| / (N max|S_l|)``: disagreement relative to signal peak.

    Unlike :func:`recon_error` this shrinks with the size of the
    disagreement, so it separates round-off from real differences.
    """
    a = np.atleast_2d(np.asarray(S_a, dtype=float))
    b = np.atleast_2d(np.asarray(S_l, dtype=float))
    if a.shape != b.shape:
        raise DataError(f"shape mismatch {a.shape} vs {b.shape}")
    peak = np.abs(b).max() if b.size else 0.0
    d = np.abs(np.abs(a) - np.abs(b))
    return 0.0 if peak == 0.0 else float(d.sum() / (d.size * peak))


def localization_error(est_pos, true_pos) -> float:
    return float(np.linalg.norm(np.asarray(est_pos, dtype=float) - np.asarray(true_pos, dtype=float)))


# -- seeded random scenes ----------------------------------------------------

def random_scene(leadfield: LeadField, n_sources: int = 1, n_samples: int = 512,
                 sample_rate: float = 256.0, snr_db: float | None = None,
                 seed: int = 0, active: tuple[int, int] | None = None) -> DipoleScene:
    """Sources at distinct random grid points with random orientations and
    sine/burst waveforms of random frequency; noise set from ``snr_db``.

    ``active`` is a sample range ``(start, stop)`` that burst centers are
    drawn from (default: the whole record); burst width is an eighth of it.
    """
    start, stop = active if active is not None else (0, n_samples)
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(leadfield), size=n_sources, replace=False)
    ori = rng.standard_normal((n_sources, 3))
    ori /= np.linalg.norm(ori, axis=1, keepdims=True)
    waves = []
    for _ in range(n_sources):
        kind = "sine" if rng.random() < 0.5 else "burst"
        params = {"freq": float(rng.uniform(4.0, 30.0)), "phase": float(rng.uniform(0, 2 * math.pi)),
                  "amplitude": float(rng.uniform(0.5, 2.0))}
        if kind == "burst":
            span = (stop - start) / sample_rate
            params["center"] = start / sample_rate + float(rng.uniform(0.25, 0.75)) * span
            params["width"] = span / 8
        waves.append(waveform({"kind": kind, "params": params}, n_samples, sample_rate))
    scene = DipoleScene(leadfield.positions[idx], ori, np.array(waves), 0.0, seed,
                        n_samples, sample_rate)
    if snr_db is None:
        return scene
    sigma = noise_sigma_for_snr(leadfield, scene, snr_db)
    return DipoleScene(scene.positions, scene.orientations, scene.waveforms, sigma, seed,
                       n_samples, sample_rate)
