"""Tests for vanishing-viscosity sweeps, limit certificates, and the
rate-independence probe.

The scalar scenarios reduce exactly to one-dimensional dynamics, so the
running-max formula and the closed-form scalar stepping act as
solver-free references.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from histris.history import identity_kernel
from histris.spatial import build_mesh
from histris.trajectory import Trajectory
from histris.verify import smooth_fatigue
from histris.viscous import Scenario, constant_in_space_load, solve_viscous
from histris.vv import (
    DEFAULT_EPS_LEVELS,
    certify_limit,
    check_rate_independence,
    vv_sweep,
)

from helpers import scalar_scenario
from oracles import running_max_solution, scalar_fatigue_steps


def _sine_scenario(n_steps=500):
    return scalar_scenario(
        lambda t: 2.0 * math.sin(math.pi * t),
        lambda t: 2.0 * math.pi * math.cos(math.pi * t),
        n_steps=n_steps,
    )


def test_default_schedule_halves_from_a_tenth():
    assert DEFAULT_EPS_LEVELS[0] == pytest.approx(0.1)
    ratios = np.diff(np.log(DEFAULT_EPS_LEVELS))
    assert_allclose(ratios, math.log(0.5), rtol=1e-12)


def test_sweep_converges_to_running_max_solution():
    # The limit under a constant threshold is the running max of the
    # excess drive; each viscous solve lags by O(eps + tau).
    sc = _sine_scenario()
    res = vv_sweep(sc, (0.1, 0.05, 0.025), certify=False)
    oracle = running_max_solution(
        lambda t: 2.0 * math.sin(math.pi * t), 1.0, 1.0, sc.times()
    )
    errors = []
    for eps, traj in zip(res.eps_values, res.trajectories):
        err = np.abs(traj.values[:, 0] - oracle).max()
        assert err <= 6.0 * (eps + sc.tau)
        errors.append(err)
    assert errors[0] > errors[1] > errors[2]


def test_sweep_differences_shrink():
    sc = _sine_scenario()
    res = vv_sweep(sc, (0.1, 0.05, 0.025, 0.0125), certify=False)
    assert len(res.c_diffs) == 3 and len(res.h1_diffs) == 3
    assert res.c_diffs[0] > res.c_diffs[1] > res.c_diffs[2]
    assert all(d > 0 for d in res.h1_diffs)
    assert res.limit is res.trajectories[-1]
    assert res.certificate is None


def test_certificate_accepts_limit_and_rejects_shifted_copy():
    # A constant upward shift leaves the rates untouched but breaks the
    # force balance along slip, so only the genuine limit certifies.
    sc = _sine_scenario()
    res = vv_sweep(sc, (0.05, 0.0125, 0.003125), certificate_tol=1e-2)
    cert = res.certificate
    assert cert.passed
    assert cert.max_stability_violation <= 1e-2
    assert cert.max_balance_residual <= 1e-2
    assert cert.n_steps_checked == sc.n_steps

    shifted = Trajectory(times=res.limit.times, values=res.limit.values + 0.1)
    bad = certify_limit(sc, shifted, tol=1e-2)
    assert not bad.passed
    assert bad.max_balance_residual > 1e-2


def test_sweep_schedule_validation():
    sc = _sine_scenario(n_steps=10)
    with pytest.raises(ValueError, match="empty"):
        vv_sweep(sc, ())
    with pytest.raises(ValueError, match="positive"):
        vv_sweep(sc, (0.1, -0.05))
    with pytest.raises(ValueError, match="decrease"):
        vv_sweep(sc, (0.05, 0.1))


def test_solver_matches_closed_form_scalar_stepping():
    # State-dependent weight, identity history: the spatially constant
    # problem is the same implicit scheme solved in closed form, so the
    # agreement is to solver tolerance, not discretization accuracy.
    n_nodes, alpha, eps, n_steps = 5, 1.5, 0.05, 400
    mesh = build_mesh(n_nodes)
    a = lambda t: 2.0 * math.sin(math.pi * t)
    sc = Scenario(
        mesh=mesh,
        alpha=alpha,
        load=constant_in_space_load(mesh, a),
        kernel=identity_kernel(np.zeros(n_nodes)),
        dissipation=smooth_fatigue(),
        horizon=1.0,
        n_steps=n_steps,
    )
    traj, _ = solve_viscous(sc, eps)
    weight = lambda z: 0.4 + 0.6 / (1.0 + z ** 2)
    expected = scalar_fatigue_steps(a, weight, alpha, eps, sc.times())
    spread = np.abs(traj.values - traj.values[:, :1]).max()
    assert spread <= 1e-10  # constant-in-space loads stay constant in space
    assert_allclose(traj.values[:, 0], expected, rtol=0, atol=1e-9)


def test_rate_independence_probe():
    sc = _sine_scenario()
    # identity reparametrization on the same grid reproduces the solve
    same = check_rate_independence(sc, lambda s: s, 1.0, eps=0.05)
    assert same.discrepancy == 0.0

    # slowing down time: discrepancy decays with the viscosity
    slow = check_rate_independence(sc, lambda s: s * s, 1.0, eps=0.1)
    fine = check_rate_independence(sc, lambda s: s * s, 1.0, eps=0.01)
    assert fine.discrepancy <= 1.5e-2
    assert fine.discrepancy <= slow.discrepancy / 5.0
    assert slow.base_sup_norm > 0.5


def test_rate_independence_validates_the_map():
    sc = _sine_scenario(n_steps=20)
    with pytest.raises(ValueError, match="start at zero"):
        check_rate_independence(sc, lambda s: s + 0.5, 1.0, eps=0.1)
    with pytest.raises(ValueError, match="nondecreasing"):
        check_rate_independence(sc, lambda s: -s, 1.0, eps=0.1)
    with pytest.raises(ValueError, match="beyond the horizon"):
        check_rate_independence(sc, lambda s: 2.0 * s, 1.0, eps=0.1)
