"""Parity between the compiled kernel backend and the numpy fallback."""
import numpy as np
import pytest

from sapd import ArrayConfig, backend_name, draw_scene, manifold, synthesize_snapshot
from sapd.backend import numpy_impl
import sapd.backend

try:
    from sapd import _core as compiled
    HAVE_COMPILED = True
except ImportError:
    compiled = None
    HAVE_COMPILED = False

needs_compiled = pytest.mark.skipif(not HAVE_COMPILED,
                                    reason="compiled extension not built")


def random_problem(cfg, rng, k):
    thetas = np.sort(rng.uniform(-55, 55, k))
    a, b = numpy_impl().build_ab(cfg.num_elements, cfg.element_spacing, thetas)
    y = rng.standard_normal(8) * 30 + 1j * rng.standard_normal(8)
    return thetas, a, b, np.ascontiguousarray(y)


class TestBackendSelection:
    def test_backend_name_known(self):
        assert backend_name() in ("cython", "numpy")

    def test_numpy_impl_always_available(self):
        assert numpy_impl().BACKEND_NAME == "numpy"

    def test_thread_limit_env(self, monkeypatch):
        monkeypatch.setenv("SAPD_THREADS", "3")
        assert sapd.backend.thread_limit() == 3
        monkeypatch.delenv("SAPD_THREADS")
        assert sapd.backend.thread_limit() >= 1


@needs_compiled
class TestKernelParity:
    def test_build_ab(self, cfg):
        rng = np.random.default_rng(0)
        thetas = np.sort(rng.uniform(-60, 60, 5))
        a1, b1 = compiled.build_ab(cfg.num_elements, cfg.element_spacing, thetas)
        a2, b2 = numpy_impl().build_ab(cfg.num_elements, cfg.element_spacing, thetas)
        assert np.allclose(a1, a2, atol=1e-12)
        assert np.allclose(b1, b2, atol=1e-12)

    @pytest.mark.parametrize("k", [1, 2, 5, 7])
    def test_ls_solve(self, cfg, k):
        rng = np.random.default_rng(k)
        for _ in range(20):
            _, a, b, y = random_problem(cfg, rng, k)
            x1, r1, rank1 = compiled.ls_solve(a, y)
            x2, r2, rank2 = numpy_impl().ls_solve(a, y)
            assert rank1 == rank2
            assert r1 == pytest.approx(r2, rel=1e-8, abs=1e-10)
            assert np.allclose(x1, x2, atol=1e-8)

    @pytest.mark.parametrize("k", [1, 2, 5, 7])
    def test_eval_support(self, cfg, k):
        rng = np.random.default_rng(10 + k)
        for _ in range(20):
            _, a, b, y = random_problem(cfg, rng, k)
            x1, r1, beta1, rank1 = compiled.eval_support(a, b, y)
            x2, r2, beta2, rank2 = numpy_impl().eval_support(a, b, y)
            assert rank1 == rank2
            assert r1 == pytest.approx(r2, rel=1e-8, abs=1e-10)
            assert np.allclose(beta1, beta2, atol=1e-7)

    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_beta_proj(self, cfg, k):
        rng = np.random.default_rng(20 + k)
        for _ in range(20):
            _, a, b, y = random_problem(cfg, rng, k)
            lam = 0.3
            o1 = compiled.beta_proj(a, b, y, lam)
            o2 = numpy_impl().beta_proj(a, b, y, lam)
            assert np.allclose(o1[0], o2[0], atol=1e-7)
            assert np.allclose(o1[1], o2[1], atol=1e-7)

    def test_bartlett(self, cfg):
        rng = np.random.default_rng(30)
        y = np.ascontiguousarray(rng.standard_normal(8) + 1j * rng.standard_normal(8))
        grid = np.ascontiguousarray(cfg.grid_manifold)
        p1 = compiled.bartlett(grid, y)
        p2 = numpy_impl().bartlett(grid, y)
        assert np.allclose(p1, p2, rtol=1e-10)


@needs_compiled
class TestEndToEndAgreement:
    def test_estimates_match_across_backends(self, cfg, monkeypatch):
        import sapd.solver as solver
        import sapd.spectrum as spectrum

        rng = np.random.default_rng(40)
        snaps = [synthesize_snapshot(cfg, draw_scene((0.0, 8.0), 15.0, rng), rng)
                 for _ in range(25)]
        results = {}
        for name, impl in (("cython", compiled), ("numpy", numpy_impl())):
            monkeypatch.setattr(solver, "impl", impl)
            monkeypatch.setattr(spectrum, "impl", impl)
            results[name] = [solver.estimate(cfg, s.data) for s in snaps]
        for ec, en in zip(results["cython"], results["numpy"]):
            assert len(ec.angles) == len(en.angles)
            assert np.allclose(ec.angles, en.angles, atol=1e-6)
            assert ec.residual == pytest.approx(en.residual, rel=1e-6, abs=1e-9)
