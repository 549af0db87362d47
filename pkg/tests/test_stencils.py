import numpy as np
import pytest

from idcos.errors import UsageError
from idcos.pde2d import Grid2D
from idcos.stencils import build_stencil, fd_weights


def dirichlet_grid(n, span=(-1.0, 1.0)):
    return Grid2D(x_span=span, y_span=span, N_x=n, N_y=3, bc="dirichlet")


def periodic_grid(n, span=(0.0, 1.0)):
    return Grid2D(x_span=span, y_span=span, N_x=n, N_y=3, bc="periodic")


class TestWeights:
    def test_centered_second_difference(self):
        assert np.allclose(fd_weights((-1, 0, 1), 2), [1.0, -2.0, 1.0])

    def test_centered_first_difference(self):
        assert np.allclose(fd_weights((-1, 0, 1), 1), [-0.5, 0.0, 0.5])

    def test_order6_second_derivative(self):
        w = fd_weights(tuple(range(-3, 4)), 2)
        ref = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])
        assert np.allclose(w, ref, atol=1e-15)

    def test_biased_row_against_vandermonde(self):
        # independent float Vandermonde solve as oracle
        offs = tuple(range(-1, 7))
        w = fd_weights(offs, 2)
        V = np.vander(np.array(offs, dtype=float), increasing=True).T
        rhs = np.zeros(len(offs))
        rhs[2] = 2.0
        ref = np.linalg.solve(V, rhs)
        assert np.allclose(w, ref, atol=1e-10)

    def test_too_few_points(self):
        with pytest.raises(UsageError):
            fd_weights((0, 1), 2)


class TestBuildStencil:
    def test_interior_second_order_row(self):
        st = build_stencil(dirichlet_grid(12), "x", 2, 2)
        row = st.matrix[5].toarray().ravel() * st.spacing ** 2
        assert np.allclose(row[4:7], [1.0, -2.0, 1.0])

    def test_interior_order6_row(self):
        st = build_stencil(dirichlet_grid(20), "x", 2, 6)
        row = st.matrix[9].toarray().ravel() * st.spacing ** 2
        ref = [1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90]
        assert np.allclose(row[6:13], ref)

    @pytest.mark.parametrize("order,deriv", [(2, 1), (2, 2), (4, 1), (4, 2),
                                             (6, 1), (6, 2)])
    def test_constants_annihilated(self, order, deriv):
        st = build_stencil(dirichlet_grid(16), "x", deriv, order)
        out = st.apply_line(np.ones(16), g_left=1.0, g_right=1.0)
        assert np.max(np.abs(out)) <= 1e-12 / st.spacing ** deriv

    def test_linear_slope_exact(self):
        g = dirichlet_grid(16)
        st = build_stencil(g, "x", 1, 6)
        xs = g.xs
        out = st.apply_line(2.5 * xs, g_left=2.5 * g.x_span[0],
                            g_right=2.5 * g.x_span[1])
        assert np.allclose(out, 2.5, atol=1e-9)

    def test_bandwidth_bound(self):
        st = build_stencil(dirichlet_grid(25), "x", 2, 6)
        coo = st.matrix.tocoo()
        assert np.max(np.abs(coo.col - coo.row)) <= 6

    @pytest.mark.parametrize("order", [2, 4, 6])
    def test_convergence_order_dirichlet(self, order):
        errs = []
        hs = []
        for n in (20, 40, 80):
            g = dirichlet_grid(n)
            st = build_stencil(g, "x", 2, order)
            vals = np.exp(g.xs)
            d2 = st.apply_line(vals, g_left=np.exp(g.x_span[0]),
                               g_right=np.exp(g.x_span[1]))
            errs.append(np.max(np.abs(d2 - vals)))
            hs.append(st.spacing)
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert slope == pytest.approx(order, abs=0.2)

    @pytest.mark.parametrize("order", [4, 6])
    def test_boundary_row_order(self, order):
        # error measured at the first interior node only
        errs, hs = [], []
        for n in (20, 40, 80):
            g = dirichlet_grid(n)
            st = build_stencil(g, "x", 2, order)
            vals = np.exp(g.xs)
            d2 = st.apply_line(vals, g_left=np.exp(g.x_span[0]),
                               g_right=np.exp(g.x_span[1]))
            errs.append(abs(d2[0] - vals[0]))
            hs.append(st.spacing)
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert slope == pytest.approx(order, abs=0.35)

    @pytest.mark.parametrize("order", [2, 4, 6])
    def test_convergence_order_periodic(self, order):
        errs, hs = [], []
        for n in (16, 32, 64):
            g = periodic_grid(n)
            st = build_stencil(g, "x", 2, order)
            vals = np.sin(2 * np.pi * g.xs)
            d2 = st.apply_line(vals)
            errs.append(np.max(np.abs(d2 + (2 * np.pi) ** 2 * vals)))
            hs.append(st.spacing)
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert slope == pytest.approx(order, abs=0.2)

    def test_periodic_matches_rolled_dense(self):
        g = periodic_grid(17)
        st = build_stencil(g, "x", 1, 4)
        w = fd_weights((-2, -1, 0, 1, 2), 1) / g.dx
        dense = sum(np.roll(np.eye(17), -o, axis=1) * w[k]
                    for k, o in enumerate(range(-2, 3)))
        assert np.allclose(st.matrix.toarray(), dense)

    def test_grid_too_small(self):
        with pytest.raises(UsageError):
            build_stencil(dirichlet_grid(5), "x", 2, 6)
        with pytest.raises(UsageError):
            build_stencil(periodic_grid(4), "x", 2, 6)

    def test_bad_arguments(self):
        g = dirichlet_grid(12)
        with pytest.raises(UsageError):
            build_stencil(g, "z", 2, 2)
        with pytest.raises(UsageError):
            build_stencil(g, "x", 3, 2)
        with pytest.raises(UsageError):
            build_stencil(g, "x", 2, 8)
