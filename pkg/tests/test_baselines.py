"""Reference estimators (OMP, exhaustive DML) and the CRLB."""
import numpy as np
import pytest

from sapd import ArrayConfig, Scene, crlb, dml_exhaustive, manifold, omp
from sapd.baselines import BASELINE_GRID_STEP, _dictionary
from conftest import noiseless_snapshot


class TestOmp:
    def test_single_source_one_iteration(self, cfg):
        y = noiseless_snapshot(cfg, [12.0], [30.0])
        res = omp(cfg, y, k_max=1)
        assert res.angles == (12.0,)
        assert res.residual < 1e-9

    def test_well_separated_pair(self, cfg):
        y = noiseless_snapshot(cfg, [-30.0, 30.0], [30.0, 30.0])
        res = omp(cfg, y, k_max=2)
        assert sorted(res.angles) == [-30.0, 30.0]

    def test_residual_nonincreasing(self, cfg):
        rng = np.random.default_rng(0)
        y = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        prev = np.linalg.norm(y)
        for k in range(1, 6):
            res = omp(cfg, y, k_max=k)
            assert res.residual <= prev + 1e-12
            prev = res.residual

    def test_rejects_k_max_at_element_count(self, cfg):
        with pytest.raises(ValueError):
            omp(cfg, np.zeros(8, dtype=complex), k_max=8)

    def test_uses_half_degree_grid(self, cfg):
        grid, _ = _dictionary(cfg, BASELINE_GRID_STEP)
        assert BASELINE_GRID_STEP == 0.5
        assert grid[1] - grid[0] == pytest.approx(0.5)
        y = noiseless_snapshot(cfg, [12.5], [30.0])
        assert omp(cfg, y, k_max=1).angles == (12.5,)


class TestDml:
    def test_k1_equals_spectrum_argmax(self, cfg):
        rng = np.random.default_rng(1)
        grid, a = _dictionary(cfg, BASELINE_GRID_STEP)
        for _ in range(20):
            y = rng.standard_normal(8) + 1j * rng.standard_normal(8)
            res = dml_exhaustive(cfg, y, k=1)
            best = int(np.argmax(np.abs(a.conj().T @ y) ** 2))
            assert res.angles == (float(grid[best]),)

    def test_noiseless_pair_exact(self, cfg):
        y = noiseless_snapshot(cfg, [0.0, 8.0], [30.0, 30.0])
        res = dml_exhaustive(cfg, y, k=2)
        assert sorted(res.angles) == [0.0, 8.0]
        assert res.residual < 1e-8

    def test_rejects_k_above_two(self, cfg):
        with pytest.raises(ValueError):
            dml_exhaustive(cfg, np.zeros(8, dtype=complex), k=3)


class TestCrlb:
    @staticmethod
    def closed_form_single_source(cfg, amp, sigma2):
        # broadside single source: the projected derivative has energy
        # (pi*c)^2 * sum (m - mean(m))^2, c the degree-to-radian factor
        m = np.arange(cfg.num_elements)
        c = np.pi / 180.0
        energy = (np.pi * c) ** 2 * np.sum((m - m.mean()) ** 2)
        return np.sqrt(sigma2 / (2.0 * amp ** 2 * energy))

    def test_single_source_closed_form(self, cfg):
        scene = Scene(angles=(0.0,), amplitudes=(30.0,), snr_db=15.0)
        sigma2 = scene.noise_variance(cfg)
        bound = crlb(cfg, scene)
        assert bound.shape == (1,)
        assert bound[0] == pytest.approx(
            self.closed_form_single_source(cfg, 30.0, sigma2), rel=1e-9)

    def test_monotone_in_snr(self, cfg):
        vals = []
        for snr in (10.0, 20.0, 30.0):
            scene = Scene(angles=(0.0, 8.0), amplitudes=(30.0, 30.0), snr_db=snr)
            vals.append(crlb(cfg, scene).max())
        assert vals[0] > vals[1] > vals[2]
        # a 10 dB SNR step scales the bound by sqrt(10)
        assert vals[0] / vals[1] == pytest.approx(np.sqrt(10.0), rel=1e-9)

    def test_phase_invariance(self, cfg):
        base = Scene(angles=(0.0, 8.0), amplitudes=(30.0, 30.0), snr_db=15.0)
        sigma2 = base.noise_variance(cfg)
        rot = Scene(angles=(0.0, 8.0),
                    amplitudes=(30.0 * np.exp(0.7j), 30.0 * np.exp(0.7j)),
                    snr_db=15.0)
        assert np.allclose(crlb(cfg, base, sigma2), crlb(cfg, rot, sigma2), rtol=1e-9)

    def test_coincident_angles_infinite(self, cfg):
        scene = Scene(angles=(0.0, 1e-9), amplitudes=(30.0, 30.0), snr_db=15.0)
        assert np.all(np.isinf(crlb(cfg, scene)))


class TestJson:
    def test_baseline_result_schema(self, cfg):
        y = noiseless_snapshot(cfg, [0.0], [30.0])
        d = omp(cfg, y, k_max=1).to_json_dict()
        assert d["method"] == "omp"
        assert d["angles_deg"] == [0.0]
        assert "residual" in d and "elapsed_us" in d
