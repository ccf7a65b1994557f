import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_rho, lattice, next_gen, zero_radius_min_cost
from parepi import fixtures
from parepi import frontier as fr
from parepi.errors import InfeasibleCost, InfeasibleLoss, NotMonatomic, TooLarge, ValidationError
from parepi.model import AFFINE, ConstraintSet, PopulationModel
from parepi.spectral import r_e

FAST = fr.SolverOptions(n_random=4)


def _bip_min(c):
    return 2.0 * np.sqrt(max(1.0 - 2.0 * c, 0.0))


# --------------------------------------------------------------------------
# problem and loss


def test_loss_examples():
    for model in (fixtures.homogeneous(), fixtures.positive3()):
        pre, pi = fr.Problem(model), fr.Problem(model, fr.LOSS_I)
        assert pre.loss(np.ones(model.n)) == pytest.approx(r_e(model, np.ones(model.n)))
        assert pre.loss(np.zeros(model.n)) == 0.0 and pi.loss(np.zeros(model.n)) == 0.0
    assert fr.loss(fr.Problem(fixtures.homogeneous(), fr.LOSS_I), [1.0]) == pytest.approx(0.5, abs=1e-9)


def test_problem_validation():
    with pytest.raises(ValidationError):
        fr.Problem(fixtures.monatomic(), fr.LOSS_I)  # R_0 = 1
    with pytest.raises(ValidationError):
        fr.Problem(PopulationModel([1.0], [1.0], [[0.0]]))
    with pytest.raises(ValidationError):
        fr.Problem(fixtures.homogeneous(), "both")
    with pytest.raises(ValidationError):
        fr.Problem(fixtures.homogeneous(), cost_fn=AFFINE)


def test_loss_gradient_falls_back_on_degenerate_root():
    p = fr.Problem(fixtures.two_blocks(2.0, 2.0))
    grad = p.loss_gradient(np.ones(4))
    assert np.all(np.isfinite(grad))


# --------------------------------------------------------------------------
# single-objective solvers


def test_min_loss_endpoints():
    p = fr.Problem(fixtures.positive3())
    assert fr.min_loss_at_cost(p, 1.0).loss == 0.0
    assert fr.min_loss_at_cost(p, 0.0).loss == pytest.approx(p.ell_max, abs=1e-12)
    assert fr.max_loss_at_cost(p, 0.0).loss == pytest.approx(p.ell_max, abs=1e-12)
    assert fr.max_loss_at_cost(p, 1.0).loss == 0.0


def test_cost_out_of_range():
    p = fr.Problem(fixtures.homogeneous())
    with pytest.raises(InfeasibleCost):
        fr.min_loss_at_cost(p, 1.5)
    with pytest.raises(InfeasibleCost):
        fr.max_loss_at_cost(p, -0.1)
    with pytest.raises(InfeasibleLoss):
        fr.min_cost_at_loss(p, 3.0)
    with pytest.raises(InfeasibleLoss):
        fr.max_cost_at_loss(p, -1.0)


@pytest.mark.parametrize("c", [0.0, 0.2, 0.5, 0.9])
def test_homogeneous_min_loss(c):
    point = fr.min_loss_at_cost(fr.Problem(fixtures.homogeneous()), c)
    assert point.loss == pytest.approx(2 * (1 - c), abs=1e-10)
    assert point.solver_status == fr.ORACLE_VERIFIED


@pytest.mark.parametrize("c", [0.1, 0.25, 0.4])
def test_bipartite_min_loss(c):
    p = fr.Problem(fixtures.bipartite())
    point = fr.min_loss_at_cost(p, c)
    oracle = fr.grid_oracle(p, 100)
    assert point.loss == pytest.approx(_bip_min(c), abs=1e-8)
    assert point.loss <= oracle.lossinf(c) + 1e-4
    assert point.solver_status == fr.ORACLE_VERIFIED


def test_point_reproduces_outcome():
    p = fr.Problem(fixtures.positive3(), fr.LOSS_I)
    for c in (0.1, 0.3):
        for point in (fr.min_loss_at_cost(p, c, FAST), fr.max_loss_at_cost(p, c, FAST)):
            assert p.cost(point.eta) == pytest.approx(point.cost, abs=1e-8)
            assert p.loss(point.eta) == pytest.approx(point.loss, abs=1e-8)


def test_min_cost_examples():
    homog = fr.Problem(fixtures.homogeneous())
    assert fr.min_cost_at_loss(homog, homog.ell_max).cost == 0.0
    assert fr.min_cost_at_loss(homog, 1.0).cost == pytest.approx(0.5, abs=1e-6)
    multi = fr.Problem(fixtures.multipartite())
    assert fr.min_cost_at_loss(multi, 0.0, FAST).cost == pytest.approx(31 / 63, abs=1e-6)


def test_max_cost_examples():
    pos = fr.Problem(fixtures.positive3())
    # any point within loss_tol of ell_max is admissible, so the cost is only near zero
    tight_pos = fr.SolverOptions(loss_tol=1e-10 * pos.ell_max)
    assert fr.max_cost_at_loss(pos, pos.ell_max, tight_pos).cost == pytest.approx(0.0, abs=1e-6)
    assert fr.max_cost_at_loss(pos, pos.ell_max).cost <= 1e-5
    assert fr.max_cost_at_loss(pos, 0.0).cost == 1.0
    mono = fr.Problem(fixtures.monatomic())
    tight = fr.SolverOptions(loss_tol=1e-10)
    assert fr.max_cost_at_loss(mono, mono.ell_max, tight).cost == pytest.approx(0.5, abs=1e-6)


def test_ties_prefer_cheaper_then_smaller_eta():
    a = (0.0, 0.5, (1.0, 0.0))
    assert fr._better((0.0, 0.4, (1.0, 1.0)), a)
    assert fr._better((0.0, 0.5, (0.0, 1.0)), a)
    assert not fr._better((1e-3, 0.1, (0.0, 0.0)), a)


def test_solver_is_deterministic():
    p = fr.Problem(fixtures.random_model(np.random.default_rng(3), 4))
    a = fr.min_loss_at_cost(p, 0.3, FAST)
    b = fr.min_loss_at_cost(fr.Problem(p.model), 0.3, FAST)
    np.testing.assert_array_equal(a.eta, b.eta)


@pytest.mark.parametrize("cs", [ConstraintSet.oscillation(0.2), ConstraintSet.ordered([1, 0])])
def test_constrained_solves_stay_admissible(cs):
    p = fr.Problem(fixtures.bipartite(), constraints=cs)
    oracle = fr.grid_oracle(p, 100)
    for c in (0.2, 0.4):
        point = fr.min_loss_at_cost(p, c)
        assert cs.contains(point.eta, atol=1e-9)
        assert point.cost <= c + 1e-9
        assert point.loss <= oracle.lossinf(c) + 1e-4


def test_affine_cost_matches_transformed_model():
    rng = np.random.default_rng(7)
    model = fixtures.random_model(rng, 3, with_cost=True)
    from parepi.model import to_uniform_cost_model

    affine = fr.Problem(model, cost_fn=AFFINE)
    flat = fr.Problem(to_uniform_cost_model(model))
    for c in (0.2, 0.5):
        assert fr.min_loss_at_cost(affine, c).loss == pytest.approx(fr.min_loss_at_cost(flat, c).loss, abs=1e-6)


# --------------------------------------------------------------------------
# oracle


def test_oracle_homogeneous_is_exact():
    o = fr.grid_oracle(fr.Problem(fixtures.homogeneous()), 100)
    for k in range(101):
        c = k / 100
        assert o.lossinf(c) == pytest.approx(2 * (1 - c), abs=1e-12)


def test_oracle_bipartite_disconnecting_strategy():
    o = fr.grid_oracle(fr.Problem(fixtures.bipartite()), 50)
    assert o.lossinf(0.5) == pytest.approx(0.0, abs=1e-12)
    assert o.costinf(0.0) == pytest.approx(0.5, abs=1e-12)
    assert o.losssup(0.0) == pytest.approx(2.0, abs=1e-12)
    assert o.costsup(2.0) == pytest.approx(0.0, abs=1e-12)


def test_oracle_values_use_dense_eigenvalues():
    p = fr.Problem(fixtures.positive3())
    o = fr.grid_oracle(p, 6)
    model = p.model
    etas = lattice(3, 6)
    assert len(o.etas) == len(etas)
    for e, c, ell in zip(o.etas, o.costs, o.losses):
        assert c == pytest.approx(float(np.dot(model.weights, 1 - e)), abs=1e-12)
        assert ell == pytest.approx(dense_rho(next_gen(model.kernel, model.weights, model.gamma, e)), abs=1e-10)


def test_oracle_envelopes_are_monotone():
    o = fr.grid_oracle(fr.Problem(fixtures.positive3(), fr.LOSS_I), 12)
    cs = np.linspace(0, 1, 41)
    for env in (o.lossinf, o.losssup):
        vals = [env(c) for c in cs]
        assert np.all(np.diff(vals) <= 1e-12)
    ls = np.linspace(0, o.losses.max(), 41)
    for env in (o.costinf, o.costsup):
        vals = [env(l) for l in ls]
        assert np.all(np.diff(vals) <= 1e-12)


def test_oracle_too_large():
    with pytest.raises(TooLarge):
        fr.grid_oracle(fr.Problem(fixtures.multipartite()), 4)
    with pytest.raises(TooLarge):
        fr.grid_oracle(fr.Problem(fixtures.two_blocks()), 100)


def test_oracle_respects_constraints():
    cs = ConstraintSet.oscillation(0.3)
    o = fr.grid_oracle(fr.Problem(fixtures.bipartite(), constraints=cs), 20)
    assert all(cs.contains(e) for e in o.etas)


# --------------------------------------------------------------------------
# frontiers


def test_homogeneous_frontier_grid():
    curve = fr.pareto_frontier(fr.Problem(fixtures.homogeneous()), 11)
    np.testing.assert_allclose(curve.costs, np.linspace(0, 1, 11), atol=1e-9)
    np.testing.assert_allclose(curve.losses, 2 * (1 - curve.costs), atol=1e-8)


def test_homogeneous_anti_frontier_is_the_same_line():
    curve = fr.anti_pareto_frontier(fr.Problem(fixtures.homogeneous()), 6)
    np.testing.assert_allclose(curve.losses, 2 * (1 - curve.costs), atol=1e-8)
    assert curve.costs[0] == 0.0 and curve.costs[-1] == 1.0


def test_frontier_endpoints_and_monotonicity():
    p = fr.Problem(fixtures.positive3())
    curve = fr.pareto_frontier(p, 9, FAST)
    assert curve.points[0].cost == 0.0
    assert curve.points[0].loss == pytest.approx(p.ell_max, abs=1e-12)
    assert curve.points[-1].loss <= FAST.loss_tol
    assert np.all(np.diff(curve.losses) < 0)
    for point in curve.points:
        assert p.loss(point.eta) == pytest.approx(point.loss, abs=1e-8)
        assert p.cost(point.eta) == pytest.approx(point.cost, abs=1e-8)


def test_zero_loss_plateau():
    p = fr.Problem(fixtures.positive3(), fr.LOSS_I)
    end = fr.min_cost_at_loss(p, 0.0, FAST).cost
    assert end < 0.9
    for c in np.linspace(end, 1.0, 4):
        assert fr.min_loss_at_cost(p, float(c), FAST).loss <= FAST.loss_tol


@settings(max_examples=40)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 6), p=st.sampled_from([0.2, 0.4, 0.7]))
def test_zero_loss_endpoint_matches_enumeration(seed, n, p):
    rng = np.random.default_rng(seed)
    k = (rng.random((n, n)) < p) * (rng.random((n, n)) + 0.1)
    k[0, 0] = 1.0  # keep R_0 > 0
    w = rng.random(n) + 0.1
    model = PopulationModel(w / w.sum(), rng.random(n) + 0.5, k)
    end = fr.min_cost_at_loss(fr.Problem(model), 0.0)
    assert end.loss == 0.0
    assert end.cost == pytest.approx(zero_radius_min_cost(k, model.weights, model.gamma), abs=1e-12)


def test_zero_loss_endpoint_is_exact():
    for model in (fixtures.homogeneous(), fixtures.positive3()):
        end = fr.min_cost_at_loss(fr.Problem(model), 0.0, FAST)
        assert end.cost == 1.0 and end.loss == 0.0


def test_monatomic_anti_frontier_starts_at_atom():
    p = fr.Problem(fixtures.monatomic())
    curve = fr.anti_pareto_frontier(p, 6)
    assert curve.points[0].cost == pytest.approx(0.5, abs=1e-6)
    assert curve.points[0].loss == pytest.approx(1.0, abs=1e-9)
    assert np.all(np.diff(curve.losses) <= 1e-8)
    assert curve.points[-1].cost == 1.0 and curve.points[-1].loss == 0.0


def test_anti_frontier_needs_monatomic_kernel():
    with pytest.raises(NotMonatomic):
        fr.anti_pareto_frontier(fr.Problem(fixtures.two_blocks()), 5)


def test_grid_must_be_at_least_two():
    with pytest.raises(ValidationError):
        fr.pareto_frontier(fr.Problem(fixtures.homogeneous()), 1)


def test_threads_match_sequential(monkeypatch):
    p = fr.Problem(fixtures.positive3())
    seq = fr.pareto_frontier(p, 6, FAST.replace(workers=1))
    monkeypatch.setenv("PAREPI_THREADS", "4")
    par = fr.pareto_frontier(fr.Problem(p.model), 6, FAST)
    np.testing.assert_array_equal(seq.costs, par.costs)
    np.testing.assert_array_equal(seq.losses, par.losses)


def test_inverse_formulas_both_ways():
    p = fr.Problem(fixtures.bipartite())
    for c in (0.1, 0.2, 0.3, 0.4):
        ell = fr.min_loss_at_cost(p, c).loss
        assert fr.min_cost_at_loss(p, ell).cost == pytest.approx(c, abs=1e-5)
    for ell in (0.5, 1.0, 1.5):
        c = fr.min_cost_at_loss(p, ell).cost
        assert fr.min_loss_at_cost(p, c).loss == pytest.approx(ell, abs=1e-3 * p.ell_max)


def test_anti_value_functions_are_monotone():
    p = fr.Problem(fixtures.positive3())
    cs = np.linspace(0, 1, 6)
    worst = [fr.max_loss_at_cost(p, float(c), FAST).loss for c in cs]
    assert np.all(np.diff(worst) <= 1e-8)
    ls = np.linspace(0, p.ell_max, 5)
    most = [fr.max_cost_at_loss(p, float(l), FAST).cost for l in ls]
    assert np.all(np.diff(most) <= 1e-8)


def test_convex_loss_gives_convex_frontier():
    # isolated groups: R_e is a maximum of linear functions, hence convex
    model = PopulationModel([0.2, 0.3, 0.5], [1.0, 1.0, 1.0], np.diag([15.0, 8.0, 3.0]))
    p = fr.Problem(model)
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = rng.random(3), rng.random(3)
        assert p.loss(0.5 * (a + b)) <= 0.5 * (p.loss(a) + p.loss(b)) + 1e-12
    curve = fr.pareto_frontier(p, 9, FAST)
    ell = curve.losses
    assert np.all(ell[1:-1] <= 0.5 * (ell[:-2] + ell[2:]) + 1e-6)


def test_critical_cost_of_subcritical_model():
    model = fixtures.homogeneous(r0=0.8)
    assert fr.critical_cost_consistency(model) == (0.0, 0.0)


# --------------------------------------------------------------------------
# sampling and CSV


def test_feasible_sample_bounds():
    p = fr.Problem(fixtures.positive3())
    for o in fr.feasible_region_sample(p, 60, seed=4):
        assert 0.0 <= o.cost <= 1.0 and 0.0 <= o.loss <= p.ell_max + 1e-12


def test_feasible_sample_on_homogeneous_line():
    for o in fr.feasible_region_sample(fr.Problem(fixtures.homogeneous()), 50, seed=1):
        assert o.loss == pytest.approx(2 * (1 - o.cost), abs=1e-12)


def test_feasible_band_against_oracle():
    p = fr.Problem(fixtures.bipartite())
    o = fr.grid_oracle(p, 200)
    h = o.cost_step
    for s in fr.feasible_region_sample(p, 1000, seed=2):
        assert o.lossinf(s.cost + h) - 1e-12 <= s.loss <= o.losssup(s.cost - h) + 1e-12


def test_feasible_sample_is_seeded():
    p = fr.Problem(fixtures.positive3())
    assert fr.feasible_region_sample(p, 10, seed=5) == fr.feasible_region_sample(p, 10, seed=5)
    with pytest.raises(ValidationError):
        fr.feasible_region_sample(p, 0)


def test_frontier_csv_round_trip(tmp_path):
    curve = fr.pareto_frontier(fr.Problem(fixtures.bipartite()), 5)
    path = tmp_path / "f.csv"
    fr.write_frontier_csv(curve, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "c,ell,status,eta_1,eta_2"
    rows = fr.read_frontier_csv(path)
    np.testing.assert_allclose([r[0] for r in rows], curve.costs, rtol=1e-11)
    np.testing.assert_allclose([r[1] for r in rows], curve.losses, rtol=1e-11, atol=1e-300)


def test_outcomes_csv(tmp_path):
    path = tmp_path / "o.csv"
    fr.write_outcomes_csv([fr.Outcome(0.5, 1.0), fr.Outcome(0.0, 2.0)], path)
    assert path.read_text() == "c,ell\n0,2\n0.5,1\n"
