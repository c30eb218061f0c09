"""Shared synthetic geometry for end-to-end tests."""
from functools import lru_cache

from eegbeam.simkit import cube_grid, make_leadfield, random_scene, simulate_eeg, sphere_electrodes

K = 32
NS = 4 * K
N = 2 * NS


@lru_cache(maxsize=None)
def head(k=K, n=5, extent=0.05):
    """``k`` cap electrodes on a 10 cm sphere over an ``n^3`` cube grid."""
    return make_leadfield(sphere_electrodes(k), cube_grid(n, extent))


def scene(seed, n_sources=1, snr_db=None, leadfield=None):
    """Seeded scene whose bursts fall inside the last analyzed window."""
    lf = head() if leadfield is None else leadfield
    sc = random_scene(lf, n_sources, N, 256.0, snr_db, seed, active=(N - NS, N))
    return lf, sc, simulate_eeg(lf, sc)
