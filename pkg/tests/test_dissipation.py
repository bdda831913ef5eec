"""Tests for the state-dependent dissipation potentials.

Covers the assembled threshold weights, the potential values on and off
the admissible cone, the 1-homogeneity and four-point Lipschitz axioms,
the prox/projection duality identity, brute-force agreement in low
dimension, the conjugate membership check, and input validation.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from histris.dissipation import (
    ABS_INTERP_CONST,
    Containment,
    Fatigue,
    WeightedL1,
    check_homogeneity,
    check_lipschitz_axiom,
    conjugate_check,
    potential,
    project_subdiff_zero,
    prox_rate,
    subdiff_zero_contains,
    threshold_dual,
)
from histris.spatial import build_mesh, h1_norm, riesz_solve
from histris.verify import smooth_fatigue

from helpers import constant_threshold
from oracles import brute_force_box_qp, brute_force_l1_qp


def _smooth_weight(z):
    return 0.4 + 0.6 / (1.0 + np.asarray(z, dtype=float) ** 2)


_SMOOTH_LIPSCHITZ = 0.6 * 9.0 / (8.0 * math.sqrt(3.0))


def _weighted_l1():
    return WeightedL1(weight=_smooth_weight, lipschitz=_SMOOTH_LIPSCHITZ)


# ---------------------------------------------------------------------------
# assembled threshold weights


def test_threshold_dual_frozen_values():
    # n=3 mesh on [0,1]: mass rows are [1/6,1/12,0],[1/12,1/3,1/12],[0,1/12,1/6]
    # and the smooth weight at zeta=[0,1,2] is [1.0, 0.7, 0.52].
    mesh = build_mesh(3, 1.0)
    spec = smooth_fatigue()
    w = threshold_dual(spec, mesh, np.array([0.0, 1.0, 2.0]))
    assert_allclose(w, [0.225, 0.36, 0.145], rtol=0, atol=1e-15)


def test_threshold_dual_scalar_weight_broadcasts():
    mesh = build_mesh(5, 1.0)
    spec = Fatigue(kappa=lambda z: 0.75, lipschitz=0.0)
    w = threshold_dual(spec, mesh, np.zeros(5))
    assert_allclose(w, 0.75 * mesh.mass @ np.ones(5), rtol=0, atol=1e-16)


def test_threshold_dual_rejects_negative_weight():
    mesh = build_mesh(4, 1.0)
    spec = Fatigue(kappa=lambda z: np.asarray(z) - 1.0, lipschitz=1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        threshold_dual(spec, mesh, np.zeros(4))


# ---------------------------------------------------------------------------
# potential values


def test_fatigue_potential_on_cone_matches_pairing():
    mesh = build_mesh(6, 1.0)
    spec = smooth_fatigue()
    rng = np.random.default_rng(7)
    zeta = rng.uniform(0.0, 2.0, 6)
    rate = np.abs(rng.standard_normal(6))
    w = threshold_dual(spec, mesh, zeta)
    assert potential(spec, mesh, zeta, rate) == pytest.approx(w @ rate, rel=1e-15)


def test_fatigue_potential_off_cone_is_infinite():
    mesh = build_mesh(4, 1.0)
    spec = constant_threshold(1.0)
    rate = np.array([0.5, -1e-12, 0.0, 2.0])
    assert potential(spec, mesh, np.zeros(4), rate) == math.inf


def test_weighted_l1_potential_uses_absolute_rate():
    mesh = build_mesh(6, 1.0)
    spec = _weighted_l1()
    rng = np.random.default_rng(8)
    zeta = rng.uniform(-1.0, 1.0, 6)
    rate = rng.standard_normal(6)
    w = threshold_dual(spec, mesh, zeta)
    value = potential(spec, mesh, zeta, rate)
    assert value == pytest.approx(w @ np.abs(rate), rel=1e-15)
    assert value == potential(spec, mesh, zeta, -rate)


def test_families_agree_on_nonnegative_rates():
    mesh = build_mesh(5, 1.0)
    fat = smooth_fatigue()
    wl1 = _weighted_l1()
    rng = np.random.default_rng(9)
    for _ in range(20):
        zeta = rng.uniform(0.0, 2.0, 5)
        rate = np.abs(rng.standard_normal(5))
        assert potential(fat, mesh, zeta, rate) == pytest.approx(
            potential(wl1, mesh, zeta, rate), rel=1e-14, abs=1e-15
        )


def test_zero_rate_costs_nothing():
    mesh = build_mesh(4, 1.0)
    for spec in (smooth_fatigue(), _weighted_l1()):
        assert potential(spec, mesh, np.ones(4), np.zeros(4)) == 0.0


# ---------------------------------------------------------------------------
# axioms: 1-homogeneity and the four-point Lipschitz estimate


def test_homogeneity_500_cases():
    mesh = build_mesh(5, 1.0)
    rng = np.random.default_rng(2024)
    specs = (smooth_fatigue(), _weighted_l1())
    worst = 0.0
    for case in range(500):
        spec = specs[case % 2]
        zeta = rng.uniform(-2.0, 2.0, 5)
        rate = rng.standard_normal(5) * rng.uniform(0.1, 3.0)
        if spec.one_sided:
            rate = np.abs(rate)
        factors = np.concatenate(([0.0], rng.uniform(0.0, 50.0, 4)))
        worst = max(worst, check_homogeneity(spec, mesh, zeta, rate, factors))
    assert worst <= 1e-12


def test_homogeneity_handles_inadmissible_rate():
    # Scaling an inadmissible fatigue rate by gamma > 0 keeps it
    # inadmissible (inf == inf), and gamma = 0 recovers the zero rate.
    mesh = build_mesh(4, 1.0)
    spec = constant_threshold(1.0)
    rate = np.array([1.0, -0.5, 0.0, 0.2])
    assert check_homogeneity(spec, mesh, np.zeros(4), rate, [0.0, 0.5, 2.0]) == 0.0


def test_homogeneity_rejects_negative_factor():
    mesh = build_mesh(3, 1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        check_homogeneity(constant_threshold(), mesh, np.zeros(3), np.ones(3), [-1.0])


def test_four_point_estimate_500_cases():
    mesh = build_mesh(5, 1.0)
    rng = np.random.default_rng(4096)
    specs = (smooth_fatigue(), _weighted_l1())
    worst = -math.inf
    for case in range(500):
        spec = specs[case % 2]
        zeta1 = rng.uniform(-2.0, 2.0, 5)
        zeta2 = zeta1 + rng.standard_normal(5) * rng.uniform(0.01, 2.0)
        rate1 = rng.standard_normal(5)
        rate2 = rate1 + rng.standard_normal(5) * rng.uniform(0.01, 2.0)
        if spec.one_sided:
            rate1, rate2 = np.abs(rate1), np.abs(rate2)
        worst = max(worst, check_lipschitz_axiom(spec, mesh, zeta1, zeta2, rate1, rate2))
    assert worst <= 1e-10


def test_four_point_requires_admissible_rates():
    mesh = build_mesh(4, 1.0)
    spec = constant_threshold(1.0)
    bad = np.array([1.0, -1.0, 0.0, 0.0])
    good = np.ones(4)
    with pytest.raises(ValueError, match="admissible"):
        check_lipschitz_axiom(spec, mesh, np.zeros(4), np.ones(4), bad, good)


def test_four_point_constant_is_scaled_weight_lipschitz():
    spec = Fatigue(kappa=lambda z: np.full_like(z, 1.0), lipschitz=2.0)
    assert spec.four_point_constant == pytest.approx(2.0 * ABS_INTERP_CONST, rel=1e-15)
    assert _weighted_l1().four_point_constant == pytest.approx(
        ABS_INTERP_CONST * _SMOOTH_LIPSCHITZ, rel=1e-15
    )


# ---------------------------------------------------------------------------
# prox / projection duality


def test_prox_projection_identity_n8():
    # prox(force) and the dual-metric projection are computed by
    # independent solvers; the shrinkage identity ties them together.
    mesh = build_mesh(8, 1.0)
    rng = np.random.default_rng(77)
    worst = 0.0
    for spec in (smooth_fatigue(), _weighted_l1()):
        for eps in (1.0, 1e-2):
            for _ in range(25):
                zeta = rng.uniform(-1.5, 1.5, 8)
                omega = rng.standard_normal(8) * rng.uniform(0.2, 3.0)
                rate = prox_rate(spec, mesh, zeta, omega, eps)
                proj = project_subdiff_zero(spec, mesh, zeta, omega)
                via_proj = riesz_solve(mesh, omega - proj) / eps
                rel = h1_norm(mesh, rate - via_proj) / (1.0 + h1_norm(mesh, rate))
                worst = max(worst, rel)
    assert worst <= 1e-8


def test_prox_matches_brute_force_n3():
    mesh = build_mesh(3, 1.0)
    rng = np.random.default_rng(555)
    for _ in range(60):
        eps = rng.uniform(0.05, 1.5)
        zeta = rng.uniform(-1.0, 1.0, 3)
        omega = rng.standard_normal(3)
        w_fat = threshold_dual(smooth_fatigue(), mesh, zeta)
        expected, _ = brute_force_box_qp(
            eps * mesh.riesz, omega - w_fat, lower=np.zeros(3)
        )
        got = prox_rate(smooth_fatigue(), mesh, zeta, omega, eps)
        assert_allclose(got, expected, rtol=0, atol=1e-9)

        w_l1 = threshold_dual(_weighted_l1(), mesh, zeta)
        expected, _ = brute_force_l1_qp(eps * mesh.riesz, omega, w_l1)
        got = prox_rate(_weighted_l1(), mesh, zeta, omega, eps)
        assert_allclose(got, expected, rtol=0, atol=1e-9)


def test_projection_matches_brute_force_n3():
    mesh = build_mesh(3, 1.0)
    rng = np.random.default_rng(556)
    hess = mesh.riesz_inverse()
    for _ in range(60):
        zeta = rng.uniform(-1.0, 1.0, 3)
        omega = rng.standard_normal(3) * 2.0
        lin = riesz_solve(mesh, omega)
        w_fat = threshold_dual(smooth_fatigue(), mesh, zeta)
        expected, _ = brute_force_box_qp(hess, lin, upper=w_fat)
        got = project_subdiff_zero(smooth_fatigue(), mesh, zeta, omega)
        assert_allclose(got, expected, rtol=0, atol=1e-9)

        w_l1 = threshold_dual(_weighted_l1(), mesh, zeta)
        expected, _ = brute_force_box_qp(hess, lin, lower=-w_l1, upper=w_l1)
        got = project_subdiff_zero(_weighted_l1(), mesh, zeta, omega)
        assert_allclose(got, expected, rtol=0, atol=1e-9)


def test_projection_fixes_admissible_points():
    mesh = build_mesh(6, 1.0)
    spec = _weighted_l1()
    zeta = np.linspace(-1.0, 1.0, 6)
    w = threshold_dual(spec, mesh, zeta)
    inside = 0.6 * w * np.array([1, -1, 1, 1, -1, 1], dtype=float)
    assert_allclose(project_subdiff_zero(spec, mesh, zeta, inside), inside,
                    rtol=0, atol=1e-12)


def test_prox_rejects_bad_eps():
    mesh = build_mesh(3, 1.0)
    spec = constant_threshold()
    for eps in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError, match="eps"):
            prox_rate(spec, mesh, np.zeros(3), np.ones(3), eps)


# ---------------------------------------------------------------------------
# admissible-force membership and the conjugate check


def test_membership_reports_violating_nodes():
    mesh = build_mesh(5, 1.0)
    spec = constant_threshold(1.0)
    w = threshold_dual(spec, mesh, np.zeros(5))

    inside = subdiff_zero_contains(spec, mesh, np.zeros(5), w - 0.01)
    assert isinstance(inside, Containment)
    assert bool(inside)
    assert inside.violating_nodes.size == 0

    candidate = w.copy()
    candidate[2] += 0.3
    out = subdiff_zero_contains(spec, mesh, np.zeros(5), candidate)
    assert not out.ok
    assert out.worst_node == 2
    assert out.worst_violation == pytest.approx(0.3, rel=1e-12)
    assert_allclose(out.violating_nodes, [2])


def test_membership_is_one_sided_for_fatigue_only():
    # Strongly negative forces are admissible for the one-sided family
    # but violate the symmetric box of the weighted l1 family.
    mesh = build_mesh(4, 1.0)
    zeta = np.zeros(4)
    fat, wl1 = smooth_fatigue(), _weighted_l1()
    omega = -3.0 * threshold_dual(fat, mesh, zeta)
    assert subdiff_zero_contains(fat, mesh, zeta, omega).ok
    report = subdiff_zero_contains(wl1, mesh, zeta, omega)
    assert not report.ok
    assert report.violating_nodes.size == 4


def test_conjugate_check_member_and_nonmember():
    mesh = build_mesh(5, 1.0)
    zeta = np.linspace(0.0, 2.0, 5)
    for spec in (smooth_fatigue(), _weighted_l1()):
        w = threshold_dual(spec, mesh, zeta)
        member = conjugate_check(spec, mesh, zeta, 0.5 * w)
        assert member.is_member
        assert member.consistent
        assert member.residual <= 1e-6 * (1.0 + 1.0)

        outside = conjugate_check(spec, mesh, zeta, 2.0 * w)
        assert not outside.is_member
        assert outside.consistent
        assert outside.sup_estimate > 0.0
        assert outside.margin > 0.0


def test_conjugate_check_consistent_on_random_forces():
    mesh = build_mesh(4, 1.0)
    rng = np.random.default_rng(31)
    for spec in (smooth_fatigue(), _weighted_l1()):
        for _ in range(25):
            zeta = rng.uniform(-1.0, 1.0, 4)
            omega = rng.standard_normal(4) * rng.uniform(0.05, 2.0)
            assert conjugate_check(spec, mesh, zeta, omega).consistent


# ---------------------------------------------------------------------------
# convexity in the rate


def test_potential_is_convex_in_rate():
    mesh = build_mesh(5, 1.0)
    rng = np.random.default_rng(64)
    for spec in (smooth_fatigue(), _weighted_l1()):
        for _ in range(100):
            zeta = rng.uniform(-1.0, 1.0, 5)
            r1 = rng.standard_normal(5)
            r2 = rng.standard_normal(5)
            if spec.one_sided:
                r1, r2 = np.abs(r1), np.abs(r2)
            lam = rng.uniform()
            mix = potential(spec, mesh, zeta, lam * r1 + (1 - lam) * r2)
            split = lam * potential(spec, mesh, zeta, r1) \
                + (1 - lam) * potential(spec, mesh, zeta, r2)
            assert mix <= split + 1e-12


# ---------------------------------------------------------------------------
# construction validation


def test_specs_reject_bad_lipschitz():
    with pytest.raises(ValueError, match="lipschitz"):
        Fatigue(kappa=lambda z: z, lipschitz=-1.0)
    with pytest.raises(ValueError, match="lipschitz"):
        WeightedL1(weight=lambda z: z, lipschitz=math.inf)
