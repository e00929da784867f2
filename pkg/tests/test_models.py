import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma

from oracles import CrankNicolsonOracle, materialize_operator

from fracphase.grids import PeriodicGrid
from fracphase.kernels import kernel_row, omega
from fracphase.meshes import build_uniform
from fracphase.models import (
    ModelParams,
    ModelState,
    SolverConfig,
    SolverFailure,
    StepSystem,
    advance,
    assemble_rhs,
    initial_cosine_mix,
    initial_random,
    mms_exact,
    mms_profile,
    mms_source,
    mms_source_avg,
    solve_step,
    step_operator,
)
from fracphase.potentials import sh_constants


@pytest.fixture
def grid():
    return PeriodicGrid(2.0 * np.pi, 2.0 * np.pi, 16, 16)


def make_params(kind, alpha=0.6, M=0.01, epsilon=0.25, g=1.0, delta=0.2,
                S=2.0):
    return ModelParams(kind=kind, alpha=alpha, M=M, epsilon=epsilon, g=g,
                       delta=delta, S=S)


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            make_params("nope")
        with pytest.raises(ValueError):
            make_params("tfch", alpha=0.0)
        with pytest.raises(ValueError):
            make_params("tfch", alpha=1.2)
        with pytest.raises(ValueError):
            make_params("tfch", M=-1.0)

    def test_kernel_order(self):
        assert make_params("tfsh", alpha=0.7).nu == pytest.approx(0.3)
        assert make_params("tfsh", alpha=1.0).nu == 0.0


class TestStepOperator:
    def test_sh_eigмode(self, grid):
        params = make_params("tfsh", M=0.6)
        b0, c = 1.3, 0.4
        w = np.full(grid.shape, c)
        v = grid.field(lambda x, y: np.sin(2 * x))
        got = step_operator(params, grid, b0, w, v)
        factor = b0 + 0.5 * 0.6 * (9.0 + 2.0 * c)
        assert np.allclose(got, factor * v, atol=1e-9)

    def test_ac_on_constant(self, grid):
        params = make_params("tfac_vc", M=0.02)
        rng = np.random.default_rng(3)
        w = rng.normal(size=grid.shape)
        ones = np.ones(grid.shape)
        got = step_operator(params, grid, 0.7, w, ones)
        want = 0.7 + 0.5 * 0.02 * (w - grid.mean(w))
        assert np.allclose(got, want, atol=1e-12)

    def test_ch_on_constant(self, grid):
        params = make_params("tfch", M=0.02)
        rng = np.random.default_rng(4)
        w = rng.normal(size=grid.shape)
        ones = np.ones(grid.shape)
        got = step_operator(params, grid, 0.7, w, ones)
        want = 0.7 * ones + 0.5 * 0.02 * grid.laplacian(w)
        assert np.allclose(got, want, atol=1e-10)

    @pytest.mark.parametrize("kind", ["tfac_vc", "tfch", "tfsh"])
    def test_linearity(self, grid, kind):
        params = make_params(kind)
        rng = np.random.default_rng(5)
        w = rng.normal(size=grid.shape)
        u = rng.normal(size=grid.shape)
        v = rng.normal(size=grid.shape)
        fu = step_operator(params, grid, 0.9, w, u)
        fv = step_operator(params, grid, 0.9, w, v)
        fuv = step_operator(params, grid, 0.9, w, u + v)
        scale = np.linalg.norm(fu) + np.linalg.norm(fv)
        assert np.linalg.norm(fuv - fu - fv) <= 1e-12 * scale


class TestAssembleRhs:
    def test_steady_constant_gives_b0_phi(self, grid):
        params = make_params("tfac_vc")
        phi0 = np.full(grid.shape, 0.3)
        state = ModelState.initial(phi0, params.relation())
        mesh = build_uniform(1.0, 4)
        row = kernel_row(mesh, 1, params.nu)
        rel = params.relation()
        r_next = rel.closure(phi0)
        rhs = assemble_rhs(params, grid, state, row, r_next)
        assert np.allclose(rhs, row.b0 * phi0, rtol=1e-12)

    def test_sh_constant_golden(self):
        # hand assembly on a 4x4 grid with constant data
        grid = PeriodicGrid(2.0 * np.pi, 2.0 * np.pi, 4, 4)
        params = make_params("tfsh", M=0.6, g=1.0, delta=0.2)
        c = sh_constants(1.0, 0.2)
        phi0 = np.full(grid.shape, 0.1)
        state = ModelState.initial(phi0, params.relation())
        mesh = build_uniform(1.0, 2)
        row = kernel_row(mesh, 1, params.nu)
        rel = params.relation()
        r_next = rel.closure(phi0)  # staggered update keeps N(phi0)
        w = r_next + params.S
        rhs = assemble_rhs(params, grid, state, row, r_next)
        # (1+Lap)^2 of a constant is the constant itself
        want = (row.b0 * phi0
                - 0.5 * 0.6 * (phi0 + 2.0 * w * phi0)
                + 0.6 * (2.0 / 3.0 * w - c.c2))
        assert np.allclose(rhs, want, rtol=1e-12)

    @pytest.mark.parametrize("kind", ["tfac_vc", "tfch", "tfsh"])
    def test_alpha_one_matches_cn_rhs(self, grid, kind):
        params = make_params(kind, alpha=1.0, M=0.05, epsilon=0.3)
        rng = np.random.default_rng(6)
        phi0 = 0.1 * rng.normal(size=grid.shape)
        state = ModelState.initial(phi0, params.relation())
        mesh = build_uniform(1.0, 5)
        row = kernel_row(mesh, 1, params.nu)
        rel = params.relation()
        r_next = rel.closure(phi0)
        rhs = assemble_rhs(params, grid, state, row, r_next)
        oracle = CrankNicolsonOracle(kind, 16, 2.0 * np.pi, M=0.05,
                                     epsilon=0.3, g=1.0, delta=0.2)
        want = oracle._rhs(phi0, r_next + 2.0, mesh.step(1), None)
        assert np.allclose(rhs, want, rtol=1e-11, atol=1e-12)


class TestSolveStep:
    def test_constant_coefficient_one_iteration(self, grid):
        params = make_params("tfch", M=0.01, epsilon=0.5)
        rng = np.random.default_rng(7)
        w = np.full(grid.shape, 0.21)
        rhs = rng.normal(size=grid.shape)
        system = StepSystem(params, grid, b0=2.0, w=w, rhs=rhs)
        sol, stats = solve_step(system, np.zeros(grid.shape), SolverConfig())
        assert stats.iterations <= 1
        resid = rhs - system.apply(sol)
        assert np.linalg.norm(resid) <= 1e-12 * np.linalg.norm(rhs)

    def test_zero_rhs(self, grid):
        params = make_params("tfsh")
        system = StepSystem(params, grid, b0=1.0, w=np.ones(grid.shape),
                            rhs=np.zeros(grid.shape))
        sol, stats = solve_step(system, np.ones(grid.shape), SolverConfig())
        assert np.array_equal(sol, np.zeros(grid.shape))
        assert stats.iterations == 0

    @pytest.mark.parametrize("kind", ["tfac_vc", "tfch", "tfsh"])
    def test_matches_dense_solve(self, kind):
        grid = PeriodicGrid(2.0 * np.pi, 2.0 * np.pi, 8, 8)
        params = make_params(kind, M=0.1)
        rng = np.random.default_rng(8)
        w = 0.3 + 0.2 * rng.normal(size=grid.shape)
        rhs = rng.normal(size=grid.shape)
        system = StepSystem(params, grid, b0=1.7, w=w, rhs=rhs)
        A = materialize_operator(system.apply, grid.shape)
        want = np.linalg.solve(A, rhs.ravel()).reshape(grid.shape)
        sol, stats = solve_step(system, np.zeros(grid.shape), SolverConfig())
        assert np.max(np.abs(sol - want)) <= 1e-10 * max(
            1.0, np.max(np.abs(want)))

    def test_failure_carries_history(self, grid):
        # nearly singular leading coefficient with a wild coefficient field
        # cannot converge within a two-iteration budget
        params = make_params("tfch")
        rng = np.random.default_rng(9)
        w = 50.0 * rng.normal(size=grid.shape)
        rhs = rng.normal(size=grid.shape)
        system = StepSystem(params, grid, b0=1e-9, w=w, rhs=rhs)
        with pytest.raises(SolverFailure) as err:
            solve_step(system, np.zeros(grid.shape),
                       SolverConfig(rtol=1e-12, maxiter=2, restart=2))
        assert len(err.value.residual_history) >= 1


class TestAdvance:
    def test_constant_fixed_point_ac_ch(self, grid):
        mesh = build_uniform(1.0, 3)
        for kind in ("tfac_vc", "tfch"):
            params = make_params(kind)
            phi0 = np.full(grid.shape, 0.3)
            state = ModelState.initial(phi0, params.relation())
            state, r_next, _ = advance(state, mesh, params, grid)
            assert np.allclose(state.phi, phi0, atol=1e-13)
            assert np.allclose(r_next, params.relation().closure(phi0))

    def test_zero_fixed_point_sh(self, grid):
        # mu vanishes identically at phi = 0 by the constant identities
        params = make_params("tfsh", M=0.6)
        mesh = build_uniform(1.0, 3)
        state = ModelState.initial(np.zeros(grid.shape), params.relation())
        state, _, _ = advance(state, mesh, params, grid)
        assert np.max(np.abs(state.phi)) < 1e-13

    def test_state_reconstruction_invariant(self, grid):
        params = make_params("tfac_vc", alpha=0.5)
        mesh = build_uniform(1.0, 6)
        state = ModelState.initial(initial_random(grid, 0),
                                   params.relation())
        for _ in range(6):
            state, _, _ = advance(state, mesh, params, grid)
        recon = state.phi0 + sum(state.history)
        assert np.max(np.abs(recon - state.phi)) < 1e-11
        assert state.n == len(state.history) == 6

    @pytest.mark.parametrize("kind", ["tfac_vc", "tfch"])
    def test_mass_conserved(self, grid, kind):
        params = make_params(kind, alpha=0.4)
        mesh = build_uniform(0.8, 8)
        state = ModelState.initial(initial_random(grid, 1),
                                   params.relation())
        ones = np.ones(grid.shape)
        m0 = grid.inner(state.phi, ones)
        denom = max(abs(m0), grid.inner(np.abs(state.phi), ones))
        for _ in range(8):
            state, _, _ = advance(state, mesh, params, grid)
            assert abs(grid.inner(state.phi, ones) - m0) < 1e-11 * denom


class TestManufactured:
    def test_exact_at_zero(self, grid):
        got = mms_exact(0.0, grid, 0.6)
        assert np.array_equal(got, mms_profile(grid))

    def test_exact_vanishes_at_one_for_sigma_one(self, grid):
        assert np.allclose(mms_exact(1.0, grid, 1.0), 0.0, atol=1e-15)

    def test_exact_factor(self, grid):
        got = mms_exact(1.0, grid, 0.6)
        factor = 1.0 - 1.0 / gamma(1.6)
        assert np.allclose(got, factor * mms_profile(grid), rtol=1e-13)
        assert factor == pytest.approx(-0.11917, abs=5e-6)

    def test_source_constant_caputo_when_sigma_equals_alpha(self, grid):
        params = make_params("tfsh", alpha=0.6)
        f1 = mms_source(params, 0.3, grid, 0.6)
        f2 = mms_source(params, 0.9, grid, 0.6)
        # spatial mu part varies with t, but the fractional factor is -1;
        # isolating it: f + M*G(mu) must equal -profile at both times
        for t, f in ((0.3, f1), (0.9, f2)):
            phi_e = mms_exact(t, grid, 0.6)
            mu = grid.one_plus_lap_sq(phi_e) + params.potential_prime(phi_e)
            caputo = f - params.M * mu
            assert np.allclose(caputo, -mms_profile(grid), rtol=1e-12)

    def test_caputo_factor_against_quadrature(self, grid):
        # d^alpha/dt^alpha (1 - omega_{1+sigma}) at t, by its defining
        # integral of omega_{1-alpha}(t-s) * d/ds(...)
        sigma, alpha, t = 2.0, 0.6, 1.0
        want = -omega(1.0 + sigma - alpha, t)

        def integrand(s):
            return omega(1.0 - alpha, t - s) * (-omega(sigma, s))

        got, err = quad(integrand, 0.0, t, epsabs=1e-11, epsrel=1e-11,
                        limit=400)
        assert got == pytest.approx(want, rel=1e-8)

    def test_sh_source_matches_series_oracle(self):
        grid = PeriodicGrid(2.0 * np.pi, 2.0 * np.pi, 32, 32)
        params = make_params("tfsh", alpha=0.6, M=0.01)
        sigma, t = 2.0, 1.0
        f = mms_source(params, t, grid, sigma)
        phi_e = mms_exact(t, grid, sigma)
        mu = grid.one_plus_lap_sq(phi_e) + params.potential_prime(phi_e)

        def integrand(s):
            return omega(1.0 - params.alpha, t - s) * (-omega(sigma, s))

        caputo, _ = quad(integrand, 0.0, t, epsabs=1e-12, epsrel=1e-12,
                         limit=400)
        want = caputo * mms_profile(grid) + params.M * mu
        assert np.max(np.abs(f - want)) < 1e-8

    def test_source_precondition(self, grid):
        params = make_params("tfch")
        with pytest.raises(ValueError):
            mms_source(params, 0.5, grid, 0.0)

    @pytest.mark.parametrize("kind", ["tfac_vc", "tfch", "tfsh"])
    def test_interval_average_source(self, grid, kind):
        # closed-form interval average vs pointwise quadrature of the
        # midpoint-mode source (they integrate the same function of t)
        params = make_params(kind, alpha=0.6)
        sigma, t0, t1 = 0.8, 0.2, 0.7
        avg = mms_source_avg(params, t0, t1, grid, sigma)
        nodes, weights = np.polynomial.legendre.leggauss(24)
        ts = 0.5 * (t1 - t0) * nodes + 0.5 * (t0 + t1)
        acc = np.zeros(grid.shape)
        for t, wgt in zip(ts, weights):
            acc += wgt * mms_source(params, float(t), grid, sigma)
        ref = acc * 0.5  # leggauss weights sum to 2
        assert np.max(np.abs(avg - ref)) < 1e-9

    def test_interval_average_validation(self, grid):
        params = make_params("tfch")
        with pytest.raises(ValueError):
            mms_source_avg(params, 0.5, 0.5, grid, 1.0)


def test_initial_conditions_shapes_and_ranges(grid):
    u = initial_random(grid, 42)
    assert u.shape == grid.shape
    assert np.all(np.abs(u) < 0.2)
    v = initial_cosine_mix(grid)
    assert v.shape == grid.shape
    assert 0.0 < np.mean(v) < 0.2


def test_initial_random_deterministic(grid):
    assert np.array_equal(initial_random(grid, 7), initial_random(grid, 7))
    assert not np.array_equal(initial_random(grid, 7),
                              initial_random(grid, 8))
