import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eegbeam.errors import DataError, ParameterError
from eegbeam.simkit import (DipoleScene, cube_grid, load_scene, localization_error,
                            make_leadfield, orientation_error, parse_scene, random_scene,
                            recon_error, simulate_eeg, sphere_electrodes, waveform)

from scenes import head

TETRA = np.array([[0.0, 0, 1], [1, 0, 0], [0, 1, 0], [-1, -1, 0]])
vec3 = st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=3, max_size=3)


class TestLeadfield:
    def test_single_row_by_hand(self):
        lf = make_leadfield(TETRA, np.zeros((1, 3)))
        np.testing.assert_allclose(lf.gains[0, 0], np.array([0, 0, 1]) / (4 * math.pi), rtol=1e-15)

    def test_mirror_symmetry(self):
        E = np.array([[0.0, 0, 0.1], [0, 0, -0.1], [0.1, 0, 0], [-0.1, 0, 0]])
        g = make_leadfield(E, [[0.0, 0, 0]]).gains[0]
        np.testing.assert_array_equal(g[0], -g[1])
        np.testing.assert_array_equal(g[2], -g[3])

    def test_random_model_deterministic(self):
        a = make_leadfield(TETRA, np.ones((5, 3)), "random-fullrank", seed=4)
        b = make_leadfield(TETRA, np.ones((5, 3)), "random-fullrank", seed=4)
        np.testing.assert_array_equal(a.gains, b.gains)

    def test_errors(self):
        with pytest.raises(ParameterError):
            make_leadfield(TETRA[:3], np.zeros((1, 3)))
        with pytest.raises(ParameterError):
            make_leadfield(TETRA, [[0.0, 0, 1.0005]])
        with pytest.raises(ParameterError):
            make_leadfield(TETRA, np.zeros((1, 3)), "bem")

    def test_geometry_helpers(self):
        E = sphere_electrodes(32)
        assert E.shape == (32, 3)
        np.testing.assert_allclose(np.linalg.norm(E, axis=1), 0.1)
        G = cube_grid(5, 0.05)
        assert G.shape == (125, 3) and np.abs(G).max() == pytest.approx(0.05)


class TestSimulate:
    def test_empty_scene(self):
        lf = make_leadfield(TETRA, np.zeros((1, 3)))
        sc = DipoleScene(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 16)))
        np.testing.assert_array_equal(simulate_eeg(lf, sc).data, 0)

    def test_impulse(self):
        lf = make_leadfield(TETRA, [[0.0, 0, 0], [0.2, 0.2, 0.2]])
        s = np.zeros(10)
        s[5] = 1.0
        Y = simulate_eeg(lf, DipoleScene([[0.2, 0.2, 0.2]], [[1, 0, 0]], [s])).data
        np.testing.assert_array_equal(Y[:, 5], lf.gains[1][:, 0])
        np.testing.assert_array_equal(np.delete(Y, 5, axis=1), 0)

    def test_linearity(self):
        lf = head()
        rng = np.random.default_rng(0)
        pos, ori, wav = lf.positions[[3, 70]], np.array([[1.0, 0, 0], [0, 0.6, 0.8]]), rng.standard_normal((2, 30))
        both = simulate_eeg(lf, DipoleScene(pos, ori, wav)).data
        one = simulate_eeg(lf, DipoleScene(pos[:1], ori[:1], wav[:1])).data
        two = simulate_eeg(lf, DipoleScene(pos[1:], ori[1:], wav[1:])).data
        np.testing.assert_allclose(both, one + two, rtol=1e-14)

    def test_off_grid(self):
        with pytest.raises(DataError):
            simulate_eeg(head(), DipoleScene([[1.0, 1, 1]], [[1, 0, 0]], [np.ones(4)]))

    def test_seed_determinism(self):
        lf = head()
        a = simulate_eeg(lf, random_scene(lf, 2, snr_db=5.0, seed=9)).data
        b = simulate_eeg(lf, random_scene(lf, 2, snr_db=5.0, seed=9)).data
        c = simulate_eeg(lf, random_scene(lf, 2, snr_db=5.0, seed=10)).data
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, c)

    def test_snr(self):
        lf = head()
        sc = random_scene(lf, 1, n_samples=4096, snr_db=10.0, seed=1)
        clean = simulate_eeg(lf, DipoleScene(sc.positions, sc.orientations, sc.waveforms)).data
        noise = simulate_eeg(lf, sc).data - clean
        assert 10 * math.log10(np.mean(clean ** 2) / np.mean(noise ** 2)) == pytest.approx(10, abs=0.2)

    def test_scene_validation(self):
        with pytest.raises(DataError):
            DipoleScene([[0.0, 0, 0]], [[1.0, 1, 0]], [np.ones(4)])
        with pytest.raises(DataError):
            DipoleScene([[0.0, 0, 0]], [[1.0, 0, 0]], [np.ones(4)], noise_sigma=-1.0)


class TestSceneFile:
    def doc(self, **extra):
        doc = {"electrodes": {"kind": "sphere", "count": 8}, "grid": {"kind": "cube", "n": 3, "extent": 0.03},
               "sources": [{"position": {"index": 4}, "orientation": [0, 0, 2],
                            "waveform": {"kind": "sine", "params": {"freq": 8}}}],
               "noise_sigma": 0.0, "seed": 1, "n_samples": 64}
        doc.update(extra)
        return doc

    def test_parse(self):
        cfg = parse_scene(self.doc())
        assert cfg.electrodes.shape == (8, 3) and cfg.grid.shape == (27, 3)
        np.testing.assert_array_equal(cfg.scene.orientations, [[0, 0, 1]])
        np.testing.assert_array_equal(cfg.scene.positions[0], cfg.grid[4])
        assert cfg.scene.waveforms.shape == (1, 64)

    def test_file_waveform(self, tmp_path):
        (tmp_path / "w.txt").write_text(" ".join(str(i) for i in range(64)))
        doc = self.doc()
        doc["sources"][0]["waveform"] = {"kind": "file", "params": {"path": "w.txt"}}
        (tmp_path / "s.json").write_text(json.dumps(doc))
        cfg = load_scene(tmp_path / "s.json")
        np.testing.assert_array_equal(cfg.scene.waveforms[0], np.arange(64))

    @pytest.mark.parametrize("mutate", [
        lambda d: d.pop("sources"),
        lambda d: d.update(grid=[[0, 0]]),
        lambda d: d["sources"][0].update(orientation=[0, 0, 0]),
        lambda d: d["sources"][0].update(waveform={"kind": "chirp"}),
    ])
    def test_malformed(self, mutate):
        doc = self.doc()
        mutate(doc)
        with pytest.raises(DataError):
            parse_scene(doc)

    def test_bad_json(self, tmp_path):
        (tmp_path / "s.json").write_text("{")
        with pytest.raises(DataError):
            load_scene(tmp_path / "s.json")

    def test_burst_peak(self):
        w = waveform({"kind": "burst", "params": {"freq": 0.0, "phase": math.pi / 2,
                                                  "center": 0.5, "width": 0.05}}, 256, 256.0)
        assert int(np.argmax(w)) == 128


class TestMetrics:
    def test_orientation_examples(self):
        v = np.array([0.6, 0.0, 0.8])
        assert orientation_error(v, v) == 0
        assert orientation_error(-v, v) == 0
        assert orientation_error([1, 0, 0], [0, 1, 0]) == pytest.approx(2 / 3)

    def test_recon_examples(self):
        S = np.arange(6.0).reshape(2, 3)
        assert recon_error(S, S) == 0
        assert recon_error([1.0, 0.0], [0.0, 0.0]) == 0.5
        assert recon_error(-S, S) == 0
        with pytest.raises(DataError):
            recon_error(np.ones(3), np.ones(4))

    def test_localization_examples(self):
        assert localization_error([0, 0, 0], [0, 0, 0]) == 0
        assert localization_error([0, 0, 0], [0, 0, 0.003]) == pytest.approx(0.003)
        assert localization_error(np.array([1, 2, 2]) * 1e-3, [0, 0, 0]) == pytest.approx(3e-3)

    @given(vec3, vec3)
    @settings(max_examples=200)
    def test_orientation_bounds(self, a, b):
        e = orientation_error(a, b)
        assert e == 0 or 1 / 3 - 1e-12 <= e <= 1

    @given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 1000))
    @settings(max_examples=100)
    def test_recon_bounds(self, r, c, seed):
        rng = np.random.default_rng(seed)
        e = recon_error(rng.standard_normal((r, c)), rng.standard_normal((r, c)))
        assert 0 <= e <= 1
