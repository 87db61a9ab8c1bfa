import numpy as np
import pytest

from conftest import max_rel_dev, random_problem
from spectralsde import (
    AdditiveDiagonal,
    CallbackOperator,
    DimensionMismatch,
    NoiseStream,
    NonFiniteState,
    NonUniformInput,
    SolverInput,
    build_level_grids,
    build_resolvent_table,
    discrete_stochastic_convolution,
    make_eigensystem,
    merge_grids,
    path_increments,
    run_convolution,
    run_recursive,
    run_uniform,
)


def _problem(lambdas, qs, n, op, xi, seed=11, path=0):
    es = make_eigensystem(lambdas=lambdas, qs=qs)
    grids = build_level_grids(n)
    merged = merge_grids(grids)
    table = build_resolvent_table(es, merged)
    inp = SolverInput(es, grids, merged, table, op, xi)
    return inp.with_increments(path_increments(grids, merged, NoiseStream(seed, path)))


class TestRecursive:
    def test_zero_diffusion_is_damped_initial_condition(self):
        inp = _problem(
            [1.0, 4.0, 9.0], [1.0, 0.25], [2, 3],
            AdditiveDiagonal([0.0, 0.0], n_modes=3), [1.0, -2.0, 0.5],
        )
        traj = run_recursive(inp)
        expect = np.exp(inp.table.log_prefix).T * inp.xi[None, :]
        assert max_rel_dev(traj.values, expect) <= 1e-13

    def test_single_step_hand_value(self):
        inp = _problem([1.0], [1.0], [1], AdditiveDiagonal([1.0], n_modes=1), [0.0])
        traj = run_recursive(inp)
        db = inp.increments.level[0][0]
        assert traj.values[1, 0] == pytest.approx(0.5 * db, rel=1e-15)

    def test_initial_row_is_xi(self):
        inp = _problem([1.0, 2.0], [1.0], [3], AdditiveDiagonal([1.0], n_modes=2), [0.3, -0.7])
        assert np.array_equal(run_recursive(inp).values[0], [0.3, -0.7])

    def test_unconditional_stability_zero_diffusion(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            n_modes = int(rng.integers(1, 6))
            lam = np.sort(rng.uniform(0.1, 1e6, size=n_modes))
            while np.any(np.diff(lam) <= 0):
                lam = np.sort(rng.uniform(0.1, 1e6, size=n_modes))
            inp = _problem(
                list(lam), [1.0, 1.0], [int(rng.integers(1, 9)), int(rng.integers(1, 9))],
                AdditiveDiagonal([0.0, 0.0], n_modes=n_modes), rng.standard_normal(n_modes),
            )
            traj = run_recursive(inp)
            norms = np.linalg.norm(traj.values, axis=1)
            assert np.all(np.diff(norms) <= 1e-15)

    def test_causality(self):
        # perturbing one level increment must not change earlier rows
        inp = _problem(
            [1.0, 4.0], [1.0, 0.5], [2, 3],
            AdditiveDiagonal([1.0, 1.0], n_modes=2), [0.4, 0.1], seed=13,
        )
        base = run_recursive(inp).values
        m = inp.merged
        ell, i = 2, 2  # node t = 2/3, merged index 3
        eta_star = m.node_eta(i, ell)
        merged = inp.increments.merged.copy()
        col_lo = m.node_eta(i - 1, ell)  # perturb inside (t_{i-1,l}, t_{i,l}]
        merged[ell - 1, col_lo] += 1.0
        from spectralsde import aggregate_level_increments

        bumped = inp.with_increments(aggregate_level_increments(merged, inp.grids, m))
        other = run_recursive(bumped).values
        assert np.array_equal(base[:eta_star], other[:eta_star])
        assert not np.array_equal(base[eta_star], other[eta_star])

    def test_non_finite_reported_with_step(self):
        op = CallbackOperator(lambda t, x: np.full((1, 1), np.nan), 1, 1, iota=0.0)
        inp = _problem([1.0], [1.0], [2], op, [0.0])
        with pytest.raises(NonFiniteState) as err:
            run_recursive(inp)
        assert err.value.eta == 1

    def test_missing_increments_rejected(self):
        es = make_eigensystem(lambdas=[1.0], qs=[1.0])
        grids = build_level_grids([2])
        merged = merge_grids(grids)
        inp = SolverInput(
            es, grids, merged, build_resolvent_table(es, merged),
            AdditiveDiagonal([1.0], n_modes=1), [0.0],
        )
        with pytest.raises(DimensionMismatch):
            run_recursive(inp)


class TestConvolutionForm:
    def test_zero_diffusion_matches_recursive(self):
        inp = _problem(
            [1.0, 4.0, 9.0], [1.0, 0.25], [2, 3],
            AdditiveDiagonal([0.0, 0.0], n_modes=3), [1.0, -2.0, 0.5],
        )
        assert np.array_equal(run_convolution(inp).values, run_recursive(inp).values)

    def test_form_equivalence_randomized(self):
        rng = np.random.default_rng(14)
        for _ in range(25):
            inp = random_problem(rng)
            dev = max_rel_dev(run_recursive(inp).values, run_convolution(inp).values)
            assert dev <= 1e-10

    def test_initial_row(self):
        inp = _problem([2.0], [1.0], [3], AdditiveDiagonal([1.0], n_modes=1), [0.9])
        assert run_convolution(inp).values[0, 0] == 0.9


class TestUniform:
    def test_zero_everything(self):
        inp = _problem([1.0], [0.0], [4], AdditiveDiagonal([1.0], n_modes=1), [0.0])
        # q = 0 kills the noise: trajectory identically zero
        assert np.all(run_uniform(inp).values == 0.0)

    def test_deterministic_decay(self):
        inp = _problem([1.0], [1.0], [2], AdditiveDiagonal([0.0], n_modes=1), [1.0])
        traj = run_uniform(inp)
        assert traj.values[2, 0] == pytest.approx((2.0 / 3.0) ** 2, rel=1e-15)

    def test_rejects_non_uniform(self):
        inp = _problem([1.0], [1.0, 1.0], [2, 3], AdditiveDiagonal([1.0, 1.0], n_modes=1), [0.0])
        with pytest.raises(NonUniformInput):
            run_uniform(inp)

    def test_recursive_reduces_bit_for_bit(self):
        rng = np.random.default_rng(15)
        for _ in range(20):
            n_modes = int(rng.integers(1, 7))
            n_levels = int(rng.integers(1, 5))
            steps = int(rng.integers(1, 13))
            lam = np.sort(rng.uniform(0.2, 400.0, size=n_modes))
            while np.any(np.diff(lam) <= 0):
                lam = np.sort(rng.uniform(0.2, 400.0, size=n_modes))
            kind = rng.choice(["additive", "linear"])
            if kind == "additive":
                op = AdditiveDiagonal(rng.standard_normal(n_levels), n_modes=n_modes)
            else:
                from spectralsde import LinearDiagonal

                op = LinearDiagonal(
                    rng.standard_normal(n_levels),
                    rng.standard_normal(n_levels),
                    n_modes=n_modes,
                )
            inp = _problem(
                list(lam), list(rng.uniform(0.0, 1.5, size=n_levels)),
                [steps] * n_levels, op, rng.standard_normal(n_modes),
                seed=int(rng.integers(2**62)),
            )
            assert np.array_equal(run_recursive(inp).values, run_uniform(inp).values)


class TestDiscreteConvolution:
    def test_zero_diffusion_gives_zero(self):
        inp = _problem(
            [1.0, 4.0], [1.0], [3], AdditiveDiagonal([0.0], n_modes=2), [1.0, 1.0]
        )
        traj = run_recursive(inp)
        conv = discrete_stochastic_convolution(inp, traj)
        assert np.all(conv.values == 0.0)

    def test_decomposition_is_exact(self):
        rng = np.random.default_rng(16)
        for _ in range(10):
            inp = random_problem(rng)
            full = run_convolution(inp)
            conv = discrete_stochastic_convolution(inp, full)
            damped = np.zeros_like(full.values)
            damped[0] = inp.xi
            for eta in range(1, inp.merged.n_steps + 1):
                damped[eta] = (
                    1.0 / (1.0 + inp.es.lambdas * inp.merged.steps[eta - 1])
                ) * damped[eta - 1]
            assert np.array_equal(full.values, damped + conv.values)

    def test_single_step_value(self):
        inp = _problem([1.0], [1.0], [1], AdditiveDiagonal([1.0], n_modes=1), [0.0])
        traj = run_recursive(inp)
        conv = discrete_stochastic_convolution(inp, traj)
        db = inp.increments.level[0][0]
        assert conv.values[1, 0] == pytest.approx(0.5 * db, rel=1e-15)


class TestValidation:
    def test_dimension_mismatches(self):
        es = make_eigensystem(lambdas=[1.0, 2.0], qs=[1.0])
        grids = build_level_grids([2])
        merged = merge_grids(grids)
        table = build_resolvent_table(es, merged)
        op = AdditiveDiagonal([1.0], n_modes=2)
        with pytest.raises(DimensionMismatch):
            SolverInput(es, grids, merged, table, op, [0.0])  # xi too short
        with pytest.raises(DimensionMismatch):
            SolverInput(es, grids, merged, table, AdditiveDiagonal([1.0], n_modes=1), [0.0, 0.0])
        other = make_eigensystem(lambdas=[1.0, 3.0], qs=[1.0])
        with pytest.raises(DimensionMismatch):
            SolverInput(other, grids, merged, table, op, [0.0, 0.0])  # stale table
        wrong_grids = build_level_grids([3])
        with pytest.raises(DimensionMismatch):
            SolverInput(es, wrong_grids, merged, table, op, [0.0, 0.0])
