import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eqsynth.errors import ContractError, InfeasibleConstraintError, ParameterError
from eqsynth.preprocess import (OK_DERIVATION_ONLY, OK_THEOREM, VIOLATED, check_rate_condition,
                                homogenize, preprocess, scale_constraint, spectral_analysis,
                                symmetrize)
from eqsynth.problems import (ConvexityProfile, Problem, QuadraticInstance, generate_constraint,
                              generate_quadratic, kkt_solve, make_rng)
from eqsynth.synthesis import SynthesisParams


def test_symmetrize_row_vector():
    E, q, formed = symmetrize(np.array([[1.0, 1.0]]), np.zeros(1))
    np.testing.assert_array_equal(E, [[1.0, 1.0], [1.0, 1.0]])
    np.testing.assert_array_equal(q, [0.0, 0.0])
    assert formed


def test_symmetrize_leaves_psd_unchanged():
    E0 = generate_constraint(3, 2, 0.3, 1.0, seed=2)
    E, q, formed = symmetrize(E0, np.zeros(3))
    assert E is E0 and not formed


def test_symmetrize_zero_matrix():
    with pytest.raises(ParameterError):
        symmetrize(np.zeros((2, 2)), np.zeros(2))


def test_homogenize_examples():
    x, _, q = homogenize(np.diag([2.0, 0.0]), np.zeros(2))
    np.testing.assert_array_equal(x, [0.0, 0.0])
    x, _, _ = homogenize(np.diag([2.0, 0.0]), np.array([4.0, 0.0]))
    np.testing.assert_allclose(x, [2.0, 0.0])
    with pytest.raises(InfeasibleConstraintError):
        homogenize(np.diag([2.0, 0.0]), np.array([0.0, 1.0]))


def test_scale_constraint_modes():
    E = np.diag([4.0, 1.0])
    Es, c = scale_constraint(E, "trace")
    assert c == 5.0 and abs(np.linalg.norm(Es, 2) - 0.8) <= 1e-15
    Es, c = scale_constraint(E, "sigma_max")
    assert c == 4.0 and np.linalg.norm(Es, 2) == 1.0
    Es, c = scale_constraint(E, "colsum")
    assert c == 4.0
    with pytest.raises(ParameterError):
        scale_constraint(np.zeros((2, 2)))
    with pytest.raises(ParameterError):
        scale_constraint(E, "frobenius")


def test_spectral_analysis_diagonal():
    sp = spectral_analysis(np.diag([1.0, 0.5, 0.0]))
    assert sp.r == 2
    np.testing.assert_allclose(sp.sigma, [1.0, 0.5])
    assert sp.kappa_E == 2.0
    np.testing.assert_allclose(np.abs(sp.V2[:, 0]), [0.0, 0.0, 1.0])


def test_spectral_analysis_rejects_asymmetric():
    with pytest.raises(ContractError):
        spectral_analysis(np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_spectral_paper_instance(paper_problems):
    sp = preprocess(paper_problems["E2"]).spectral
    assert abs(sp.kappa_E - 100.0) <= 1e-8


def test_spectral_invariants(paper_problems):
    for p in paper_problems.values():
        pre = preprocess(p)
        sp = pre.spectral
        V = np.hstack([sp.V1, sp.V2])
        np.testing.assert_allclose(V.T @ V, np.eye(p.n), atol=1e-12)
        np.testing.assert_allclose(sp.reconstruct(), pre.E_norm, atol=1e-12)
        # already-normalized input is left unscaled, so only rounding separates it from 1
        assert abs(sp.sigma_max - 1.0) <= 1e-12


@pytest.mark.parametrize("smin,status", [(0.1, OK_THEOREM), (0.001, OK_DERIVATION_ONLY),
                                         (0.0005, VIOLATED), (0.0009995, VIOLATED)])
def test_rate_condition(smin, status):
    d = check_rate_condition(SynthesisParams(1.0, 2000.0, smin, 1.0), ConvexityProfile(1.0, 2000.0))
    assert d.status == status
    assert d.theorem_threshold == 2.0 / 2000.0 and d.derivation_threshold == 2.0 / 2001.0
    assert "2/kappa_f" in d.describe() and "2/(kappa_f+1)" in d.describe()


def test_rate_condition_sigma_max_above_one():
    d = check_rate_condition(SynthesisParams(1.0, 10.0, 0.5, 1.5), ConvexityProfile(1.0, 10.0))
    assert d.status == VIOLATED


def test_rate_condition_kappa_one():
    prof = ConvexityProfile(1.0, 1.0)
    assert check_rate_condition(SynthesisParams(1.0, 1.0, 1.0, 1.0), prof).status == OK_DERIVATION_ONLY
    assert check_rate_condition(SynthesisParams(1.0, 1.0, 0.5, 1.0), prof).status == VIOLATED


def test_paper_e3_is_boundary(paper_problems):
    assert preprocess(paper_problems["E3"]).rate_condition().status == OK_DERIVATION_ONLY


def _random_problem(seed, n, rect=False, inhom=False):
    rng = make_rng(seed, 3)
    inst = generate_quadratic(n, 1.0, 20.0, seed=seed)
    r = int(rng.integers(1, n))
    smin = 0.3 if r > 1 else 2.5
    d = int(rng.integers(r, n + 2)) if rect else None
    E = generate_constraint(n, r, smin, 2.5, seed=seed, d=d)
    q = E @ rng.standard_normal(n) if inhom else np.zeros(E.shape[0])
    return Problem(inst, E, q)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 6), st.booleans(), st.booleans())
def test_feasible_set_preserved(seed, n, rect, inhom):
    p = _random_problem(seed, n, rect, inhom)
    pre = preprocess(p)
    sol = kkt_solve(pre.shifted_objective(), pre.E_norm, np.zeros(n))
    x = pre.unshift(sol.x)
    assert np.linalg.norm(p.E @ x - p.q) <= 1e-8
    ref = kkt_solve(p.objective, p.E, p.q)
    np.testing.assert_allclose(x, ref.x, atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 6), st.booleans())
def test_preprocess_idempotent(seed, n, rect):
    pre = preprocess(_random_problem(seed, n, rect))
    p2 = Problem(pre.problem.objective, pre.E_norm, np.zeros(n))
    pre2 = preprocess(p2)
    assert np.max(np.abs(pre2.E_norm - pre.E_norm)) <= 1e-12
    assert pre2.scale == 1.0 and not pre2.was_symmetrized and not pre2.was_homogenized
    np.testing.assert_allclose(pre2.spectral.sigma, pre.spectral.sigma, atol=1e-12)


def test_preprocess_reports_both_kappas():
    E = np.array([[2.0, 0.0, 0.0], [0.0, 0.5, 0.0]])
    inst = generate_quadratic(3, 1.0, 4.0)
    pre = preprocess(Problem(inst, E, np.zeros(2)))
    assert pre.was_symmetrized
    assert abs(pre.kappa_raw - 4.0) <= 1e-12
    assert abs(pre.kappa_norm - 16.0) <= 1e-10
    assert pre.scale == 4.0


def test_preprocess_scaling_modes():
    inst = generate_quadratic(3, 1.0, 4.0)
    p = Problem(inst, np.diag([4.0, 1.0, 0.0]), np.zeros(3))
    assert preprocess(p, mode="trace").scale == 5.0
    assert preprocess(p, mode="none").scale == 1.0
    pre = preprocess(p)
    assert pre.spectral.sigma_max == 1.0 and pre.spectral.sigma_min == 0.25


def test_preprocess_infeasible():
    inst = generate_quadratic(2, 1.0, 4.0)
    E = np.array([[1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(InfeasibleConstraintError):
        preprocess(Problem(inst, E, np.array([1.0, 0.0])))


def test_shifted_objective_oracle():
    from eqsynth.problems import OracleObjective
    prof = ConvexityProfile(1.0, 1.0)
    p = Problem(OracleObjective(lambda x: x - 1.0, 2, prof), np.diag([2.0, 0.0]), np.array([2.0, 0.0]))
    pre = preprocess(p)
    np.testing.assert_allclose(pre.x_bar, [1.0, 0.0])
    np.testing.assert_allclose(pre.shifted_objective().gradient(np.zeros(2)), [0.0, -1.0])


def test_shifted_quadratic_matches():
    inst = generate_quadratic(4, 1.0, 9.0, seed=3)
    E = generate_constraint(4, 2, 0.4, 1.0, seed=3)
    q = E @ np.ones(4)
    pre = preprocess(Problem(inst, E, q))
    x = make_rng(0).standard_normal(4)
    np.testing.assert_allclose(pre.shifted_objective().gradient(x), inst.gradient(x + pre.x_bar),
                               atol=1e-12)
    assert isinstance(pre.shifted_objective(), QuadraticInstance)
