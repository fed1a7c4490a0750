import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_orthogonal
from hireg.errors import ParameterError
from hireg.regularization import (
    Method,
    RegularizationPlan,
    build_relaxed_R,
    build_tikhonov_R,
    golden_section,
    loss_relaxed,
    optimal_mu2_general,
    optimal_mu2_k0,
    optimal_mu2_k1,
    resolve_plan,
    select_s,
    stationary_mu2_k0,
)
from hireg.spectral import condition_number, eig_sym


def spectrum_strategy():
    """(lambda_1, lambda_{n-1}, lambda_n) spanning up to ten decades."""
    return st.tuples(st.floats(-8, 0), st.floats(0, 1), st.floats(-2, 2)).map(
        lambda t: (10.0 ** t[2], 10.0 ** (t[2] + t[0] * t[1]), 10.0 ** (t[2] + t[0]))
    )


def spd_with(rng, lam):
    q = random_orthogonal(rng, len(lam))
    return (q * np.asarray(lam)) @ q.T


# --- build_relaxed_R / build_tikhonov_R


def test_relaxed_r_zero_below_lambda_n():
    spec = eig_sym(np.diag([3.0, 2.0, 1.0]))
    np.testing.assert_array_equal(build_relaxed_R(spec, 0.5), np.zeros((3, 3)))
    np.testing.assert_array_equal(build_relaxed_R(spec, 1.0), np.zeros((3, 3)))


def test_relaxed_r_two_by_two():
    spec = eig_sym(np.diag([1.0, 0.01]))
    r = build_relaxed_R(spec, 1.0)
    np.testing.assert_allclose(eig_sym(r).eigenvalues, [0.99, 0.0], atol=1e-15)


def test_relaxed_r_at_lambda_s_flattens_tail():
    rng = np.random.default_rng(0)
    lam = np.array([40.0, 9.0, 3.0, 0.2, 0.001])
    n_mat = spd_with(rng, lam)
    spec = eig_sym(n_mat)
    r = build_relaxed_R(spec, lam[2])
    np.testing.assert_allclose(eig_sym(n_mat + r).eigenvalues, [40.0, 9.0, 3.0, 3.0, 3.0], rtol=1e-12)


@given(st.integers(2, 7), st.integers(0, 2**32 - 1), st.floats(0, 1))
@settings(max_examples=80, deadline=None)
def test_relaxed_r_commutes_and_bounds_condition(n, seed, t):
    rng = np.random.default_rng(seed)
    lam = np.sort(10.0 ** rng.uniform(-6, 2, n))[::-1]
    n_mat = spd_with(rng, lam)
    spec = eig_sym(n_mat)
    mu2 = spec.eigenvalues[-1] + t * (spec.eigenvalues[-2] - spec.eigenvalues[-1])
    r = build_relaxed_R(spec, mu2)
    gap = np.linalg.norm(r @ n_mat - n_mat @ r, 2)
    assert gap <= 1e-9 * np.linalg.norm(n_mat, 2) * max(np.linalg.norm(r, 2), 1e-300) + 1e-300
    kappa = condition_number(eig_sym(n_mat + r))
    assert kappa == pytest.approx(spec.eigenvalues[0] / mu2, rel=1e-8)
    assert kappa <= condition_number(spec) * (1 + 1e-9)
    assert np.all(eig_sym(r).eigenvalues >= -1e-12 * max(1.0, mu2))


def test_relaxed_r_rejects_nonpositive_mu2():
    with pytest.raises(ParameterError):
        build_relaxed_R(eig_sym(np.eye(2)), 0.0)


@pytest.mark.parametrize("n, mu2", [(3, 0.0), (2, 0.5)])
def test_tikhonov_r(n, mu2):
    np.testing.assert_array_equal(build_tikhonov_R(n, mu2), mu2 * np.eye(n))


def test_tikhonov_r_negative():
    with pytest.raises(ParameterError):
        build_tikhonov_R(2, -1.0)


# --- closed forms


@pytest.mark.parametrize(
    "lams, expected",
    [
        ((1.0, 1.0, 1.0), 1.0),
        ((100.0, 50.0, 0.01), 50.0),
        ((4.0, 3.5, 2.0), 2.0),
    ],
)
def test_optimal_mu2_k0(lams, expected):
    assert optimal_mu2_k0(*lams) == pytest.approx(expected, rel=1e-15)


def test_optimal_mu2_k0_interior_value():
    # sqrt(2 * 50 / 1) = 10 lies inside [1, 20]
    assert optimal_mu2_k0(50.0, 20.0, 1.0) == pytest.approx(10.0, rel=1e-15)


@pytest.mark.parametrize(
    "lams, expected",
    [
        ((1.0, 1.0, 1.0), 1.0),
        ((100.0, 50.0, 0.01), math.sqrt(0.0001 + 1.0)),
    ],
)
def test_optimal_mu2_k1(lams, expected):
    assert optimal_mu2_k1(*lams) == pytest.approx(expected, rel=1e-15)


@given(spectrum_strategy())
def test_optimal_mu2_k1_within_interval(lams):
    lam1, lam_mid, lam_n = lams
    mu2 = optimal_mu2_k1(lam1, lam_mid, lam_n)
    assert lam_n <= mu2 <= lam_mid


@pytest.mark.parametrize("fn", [optimal_mu2_k0, optimal_mu2_k1, stationary_mu2_k0])
@pytest.mark.parametrize("lams", [(1.0, 2.0, 0.5), (1.0, 0.5, 0.0), (0.5, 1.0, 1.0)])
def test_closed_forms_reject_bad_ordering(fn, lams):
    with pytest.raises(ParameterError):
        fn(*lams)


# --- loss


def test_loss_at_lambda_n_is_condition_number():
    assert loss_relaxed(0.01, 1, 100.0, 0.01) == pytest.approx(100.0 / 0.01, rel=1e-15)
    assert loss_relaxed(0.01, 0, 100.0, 0.01) == pytest.approx(1e4, rel=1e-15)


def test_loss_k0_arithmetic():
    assert loss_relaxed(2.0, 0, 2.0, 1.0) == pytest.approx(2.0, rel=1e-15)


def test_loss_k1_minimizer_beats_neighbours():
    mu2 = math.sqrt(0.0001 + 1.0)
    f = loss_relaxed(mu2, 1, 100.0, 0.01)
    assert f <= loss_relaxed(0.9 * mu2, 1, 100.0, 0.01)
    assert f <= loss_relaxed(1.1 * mu2, 1, 100.0, 0.01)


def test_loss_below_lambda_n_rejected():
    with pytest.raises(ParameterError):
        loss_relaxed(0.005, 1, 100.0, 0.01)


@given(spectrum_strategy(), st.integers(0, 12), st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=200)
def test_loss_midpoint_convexity(lams, k, s, t):
    lam1, lam_mid, lam_n = lams
    a = lam_n + s * (lam_mid - lam_n)
    b = lam_n + t * (lam_mid - lam_n)
    f = lambda u: loss_relaxed(u, k, lam1, lam_n)  # noqa: E731
    mid = f(0.5 * (a + b))
    assert mid <= 0.5 * (f(a) + f(b)) * (1 + 1e-12) + 1e-12


# --- numeric minimizer


def test_golden_section_quadratic():
    x = golden_section(lambda u: (u - 0.3) ** 2, 0.0, 1.0, 1e-12)
    assert x == pytest.approx(0.3, abs=1e-9)


def test_golden_section_boundary_minimum():
    assert golden_section(lambda u: u, 2.0, 5.0, 1e-12) == 2.0
    assert golden_section(lambda u: -u, 2.0, 5.0, 1e-12) == 5.0


@given(spectrum_strategy())
@settings(max_examples=150)
def test_general_k1_matches_closed_form(lams):
    got = optimal_mu2_general(1, *lams)
    assert got == pytest.approx(optimal_mu2_k1(*lams), rel=1e-6)


@given(spectrum_strategy())
@settings(max_examples=150)
def test_general_k0_matches_stationary_point(lams):
    got = optimal_mu2_general(0, *lams)
    assert got == pytest.approx(stationary_mu2_k0(*lams), rel=1e-6)


def test_general_k0_departs_from_clamped_formula():
    # the clamped sqrt(2 lambda_1 / lambda_n) sits at the far end of the interval here,
    # while the loss is minimized near sqrt(lambda_1 lambda_n) = 1
    assert optimal_mu2_k0(100.0, 50.0, 0.01) == 50.0
    assert optimal_mu2_general(0, 100.0, 50.0, 0.01) == pytest.approx(1.0, rel=1e-6)
    assert loss_relaxed(1.0, 0, 100.0, 0.01) < loss_relaxed(50.0, 0, 100.0, 0.01)


def test_general_k10_beats_grid():
    lam1, lam_mid, lam_n = 100.0, 50.0, 0.01
    mu2 = optimal_mu2_general(10, lam1, lam_mid, lam_n)
    f = lambda u: loss_relaxed(u, 10, lam1, lam_n)  # noqa: E731
    grid = np.linspace(lam_n, lam_mid, 21)
    assert all(f(mu2) <= f(g) + 1e-9 * max(1.0, abs(f(g))) for g in grid)
    h = 1e-6 * mu2
    if lam_n + h < mu2 < lam_mid - h:
        slope = (f(mu2 + h) - f(mu2 - h)) / (2 * h)
        assert abs(slope) <= 1e-3 * max(1.0, f(mu2) / mu2)


def test_general_degenerate_interval():
    assert optimal_mu2_general(3, 5.0, 1.0, 1.0) == 1.0


def test_general_rejects_bad_lower():
    with pytest.raises(ParameterError):
        optimal_mu2_general(1, 10.0, 2.0, 1.0, lower=3.0)


# --- select_s / plans


@pytest.mark.parametrize(
    "lam, target, expected",
    [
        ((1.0, 1.0, 1.0), 1e3, 3),
        ((100.0, 10.0, 0.01), 1e3, 2),
        ((100.0, 0.01, 0.001), 1e3, 1),
        ((100.0, 0.5, 0.001), 1e3, 2),
    ],
)
def test_select_s(lam, target, expected):
    assert select_s(eig_sym(np.diag(lam)), target) == expected


def test_plan_validation():
    with pytest.raises(ParameterError):
        RegularizationPlan(k=-1)
    with pytest.raises(ParameterError):
        RegularizationPlan(mu2="best")
    with pytest.raises(ParameterError):
        RegularizationPlan(omega="mid")
    with pytest.raises(ParameterError):
        RegularizationPlan(form="diagonal")
    with pytest.raises(ValueError):
        RegularizationPlan(method="ridge")


def test_plan_labels_and_forms():
    assert RegularizationPlan(Method.TR).effective_form == "identity"
    assert RegularizationPlan(Method.HR).effective_form == "relaxed"
    assert RegularizationPlan(Method.HR, name="HR_w").label == "HR_w"
    assert RegularizationPlan(Method.OFTR).label == "OFTR"
    assert RegularizationPlan("hr").method is Method.HR


SPEC3 = eig_sym(np.diag([100.0, 10.0, 0.01]))


@pytest.mark.parametrize(
    "plan, mu2",
    [
        (RegularizationPlan(Method.HR, k=1), optimal_mu2_k1(100.0, 10.0, 0.01)),
        (RegularizationPlan(Method.HR, k=0), optimal_mu2_k0(100.0, 10.0, 0.01)),
        (RegularizationPlan(Method.OFTR), optimal_mu2_k0(100.0, 10.0, 0.01)),
        (RegularizationPlan(Method.FTR), 10.0),
        (RegularizationPlan(Method.HR, k=1, mu2="lambda_s"), 10.0),
        (RegularizationPlan(Method.HR, k=1, mu2=2.0), 2.0),
        (RegularizationPlan(Method.HR, k=4), optimal_mu2_general(4, 100.0, 10.0, 0.01)),
    ],
)
def test_resolve_plan_mu2(plan, mu2):
    resolved = resolve_plan(plan, SPEC3)
    assert resolved.mu2 == pytest.approx(mu2, rel=1e-12)
    assert resolved.is_resolved
    np.testing.assert_allclose(eig_sym(resolved.r_matrix).eigenvalues[0], mu2 - 0.01, rtol=1e-12)


def test_resolve_plan_rejects_mu2_outside_interval():
    with pytest.raises(ParameterError):
        resolve_plan(RegularizationPlan(Method.HR, mu2=20.0), SPEC3)


def test_resolve_plan_omega():
    lam = [100.0, 10.0, 0.01]
    p = resolve_plan(RegularizationPlan(Method.HR, k=0, s=1, mu2=10.0, omega="min"), eig_sym(np.diag(lam)))
    # only lambda_3 is lifted to 10: q = (10 - 0.01) / 10
    assert p.omega == pytest.approx(0.999, rel=1e-12)
    p = resolve_plan(RegularizationPlan(Method.HR, k=0, s=2, mu2=1.0, omega="max"), eig_sym(np.diag(lam)))
    assert p.omega == pytest.approx(0.99, rel=1e-12)


def test_resolve_tr_uses_identity():
    p = resolve_plan(RegularizationPlan(Method.TR, mu2=0.5), SPEC3)
    np.testing.assert_array_equal(p.r_matrix, 0.5 * np.eye(3))
    assert p.k == 0


def test_resolve_auto_s():
    p = resolve_plan(RegularizationPlan(Method.HR, s="auto", condition_target=1e3), SPEC3)
    assert p.s == 2
