import numpy as np
import pytest

from alignmfg.model import (
    Domain,
    Kernel,
    LinearTerm,
    ModelError,
    QuadraticWellTerm,
    TerminalCost,
    displacement,
    kernel_eval_grad,
    terminal_eval_grad,
)

EUC2 = Domain("euclidean", 2)
TORUS1 = Domain("flat-torus", 1, (1.0,))


class TestDomain:
    def test_euclidean_displacement_is_subtraction(self):
        assert np.allclose(displacement(EUC2, (1.0, 2.0), (0.0, 2.0)), (1.0, 0.0))

    def test_torus_wraps_into_half_open_cell(self):
        # raw difference 0.8 wraps to -0.2 on the unit circle
        d = displacement(TORUS1, (0.9,), (0.1,))
        assert np.allclose(d, (-0.2,))

    def test_same_point_gives_zero(self):
        for dom, x in ((EUC2, (0.3, -0.7)), (TORUS1, (0.42,))):
            assert np.allclose(displacement(dom, x, x), 0.0)

    def test_torus_antisymmetry_and_half_period_bound(self, rng):
        dom = Domain("flat-torus", 3, (1.0, 2.0, 0.5))
        x = rng.uniform(-5, 5, size=(200, 3))
        y = rng.uniform(-5, 5, size=(200, 3))
        d_xy = dom.displacement(x, y)
        d_yx = dom.displacement(y, x)
        assert np.array_equal(d_xy, -d_yx) or np.allclose(d_xy + d_yx, 0.0, atol=0)
        half = np.asarray(dom.periods) / 2
        assert np.all(d_xy >= -half) and np.all(d_xy < half)

    def test_antisymmetry_is_exact(self, rng):
        dom = Domain("flat-torus", 2, (1.0, 3.0))
        x = rng.uniform(0, 1, size=(500, 2)) * (1.0, 3.0)
        y = rng.uniform(0, 1, size=(500, 2)) * (1.0, 3.0)
        assert np.all(dom.displacement(x, y) + dom.displacement(y, x) == 0.0)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ModelError):
            displacement(EUC2, (1.0,), (0.0, 0.0))

    def test_bad_periods_rejected(self):
        with pytest.raises(ModelError):
            Domain("flat-torus", 2, (1.0, -1.0))
        with pytest.raises(ModelError):
            Domain("euclidean", 2, (1.0, 1.0))
        with pytest.raises(ModelError):
            Domain("flat-torus", 2, (1.0,))


KERNELS = [
    Kernel("smoothed-exponential", 1.0, 1.0, 0.0),
    Kernel("smoothed-exponential", 2.5, 0.4, 0.05),
    Kernel("gaussian", 2.0, 1.0),
    Kernel("constant", 0.7, 1.0),
]


class TestKernel:
    def test_smoothed_exponential_peak_and_origin_gradient(self):
        k = Kernel("smoothed-exponential", 1.0, 1.0, 0.0)
        val, grad = kernel_eval_grad(k, np.zeros(3))
        assert val == 1.0
        assert np.all(grad == 0.0)

    def test_exponential_half_value_at_log2(self):
        # closed form: eta = exp(-|z|), so |z| = ln 2 halves the peak
        k = Kernel("smoothed-exponential", 1.0, 1.0, 0.0)
        val, _ = kernel_eval_grad(k, np.array([np.log(2.0), 0.0]))
        assert np.isclose(val, 0.5, rtol=1e-12)

    def test_gaussian_peak_is_amplitude(self):
        val, grad = kernel_eval_grad(Kernel("gaussian", 2.0, 1.0), np.zeros(2))
        assert val == 2.0
        assert np.all(grad == 0.0)

    @pytest.mark.parametrize("kernel", KERNELS)
    def test_even_positive_bounded(self, kernel, rng):
        z = rng.standard_normal((1000, 3)) * 2.0
        va = kernel.eval(z)
        vb = kernel.eval(-z)
        assert np.array_equal(va, vb)
        assert np.all(va > 0.0)
        assert np.all(va <= kernel.amplitude)

    def test_gradient_ratio_bound_smoothed_exponential(self, rng):
        for k in (Kernel("smoothed-exponential", 1.0, 0.5, 0.0),
                  Kernel("smoothed-exponential", 3.0, 2.0, 0.3)):
            z = rng.standard_normal((1000, 2)) * 3.0
            val, grad = k.eval_grad(z)
            gn = np.linalg.norm(grad, axis=-1)
            assert np.all(gn <= val / k.length_scale * (1 + 1e-12))
            assert k.grad_ratio_bound == 1.0 / k.length_scale

    def test_gaussian_has_no_ratio_bound(self):
        assert Kernel("gaussian", 1.0, 1.0).grad_ratio_bound is None
        assert Kernel("constant", 1.0, 1.0).grad_ratio_bound == 0.0

    @pytest.mark.parametrize("kernel", KERNELS)
    def test_gradient_matches_finite_differences(self, kernel, rng):
        z = rng.standard_normal((50, 3))
        z = z[np.linalg.norm(z, axis=1) > 0.1]  # keep away from the s=0 kink
        _, grad = kernel.eval_grad(z)
        step = 1e-6
        for a in range(3):
            zp = z.copy()
            zp[:, a] += step
            zm = z.copy()
            zm[:, a] -= step
            fd = (kernel.eval(zp) - kernel.eval(zm)) / (2 * step)
            scale = max(np.abs(grad[:, a]).max(), 1.0)
            assert np.abs(fd - grad[:, a]).max() <= 1e-6 * scale

    def test_invalid_parameters(self):
        with pytest.raises(ModelError):
            Kernel("smoothed-exponential", -1.0, 1.0)
        with pytest.raises(ModelError):
            Kernel("gaussian", 1.0, 0.0)
        with pytest.raises(ModelError):
            Kernel("nope", 1.0, 1.0)


class TestTerminalCost:
    def test_linear(self):
        psi = TerminalCost((LinearTerm((1.0, 0.0)),))
        val, grad = terminal_eval_grad(psi, np.array([3.0, 5.0]))
        assert val == 3.0
        assert np.allclose(grad, (1.0, 0.0))

    def test_quadratic_well_by_hand(self):
        # 0.5 * 2 * |x|^2 = 2 at x=(1,1); gradient kappa (x - x*) = (2, 2)
        psi = TerminalCost((QuadraticWellTerm((0.0, 0.0), 2.0),))
        val, grad = terminal_eval_grad(psi, np.array([1.0, 1.0]))
        assert np.isclose(val, 2.0)
        assert np.allclose(grad, (2.0, 2.0))

    def test_empty_sum_is_zero(self):
        val, grad = terminal_eval_grad(TerminalCost(), np.array([4.2, -1.0]))
        assert val == 0.0
        assert np.all(grad == 0.0)

    def test_sum_gradient_is_sum_of_gradients(self, rng):
        lin = LinearTerm((0.5, -1.0))
        well = QuadraticWellTerm((1.0, 2.0), 0.7)
        both = TerminalCost((lin, well))
        x = rng.standard_normal((20, 2))
        v, g = both.eval_grad(x, EUC2)
        v1, g1 = TerminalCost((lin,)).eval_grad(x, EUC2)
        v2, g2 = TerminalCost((well,)).eval_grad(x, EUC2)
        assert np.allclose(v, v1 + v2)
        assert np.allclose(g, g1 + g2)

    def test_gradient_matches_finite_differences(self, rng):
        psi = TerminalCost((LinearTerm((0.3, -0.2)),
                            QuadraticWellTerm((0.5, -1.0), 1.7)))
        x = rng.standard_normal((30, 2))
        _, grad = psi.eval_grad(x, EUC2)
        step = 1e-6
        for a in range(2):
            xp = x.copy()
            xp[:, a] += step
            xm = x.copy()
            xm[:, a] -= step
            fd = (psi.eval_grad(xp, EUC2)[0] - psi.eval_grad(xm, EUC2)[0]) / (2 * step)
            scale = max(np.abs(grad[:, a]).max(), 1.0)
            assert np.abs(fd - grad[:, a]).max() <= 1e-6 * scale

    def test_anisotropic_well(self):
        psi = TerminalCost((QuadraticWellTerm((0.0, 0.0), (0.0, 2.0)),))
        val, grad = terminal_eval_grad(psi, np.array([5.0, 1.0]))
        assert np.isclose(val, 1.0)  # only the y part counts
        assert np.allclose(grad, (0.0, 2.0))

    def test_lipschitz_bound_on_box(self):
        psi = TerminalCost((LinearTerm((3.0, 4.0)),))
        assert np.isclose(psi.lipschitz_bound((-1, -1), (1, 1)), 5.0)
        well = TerminalCost((QuadraticWellTerm((0.0, 0.0), 2.0),))
        # farthest corner of [-1,2]^2 from the center is (2,2)
        assert np.isclose(well.lipschitz_bound((-1, -1), (2, 2)),
                          2.0 * np.hypot(2, 2))

    def test_negative_kappa_rejected(self):
        with pytest.raises(ModelError):
            QuadraticWellTerm((0.0,), -1.0)
