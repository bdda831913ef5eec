"""Vanishing-viscosity sweeps and limit certification.

A sweep solves the same scenario over a decreasing viscosity schedule
and reports consecutive trajectory differences as Cauchy evidence.  The
finest-viscosity trajectory is the limit candidate; its certificate
checks the two defining properties of the limit evolution along the
discrete trajectory:

* stability: ``<force, v> <= potential(zeta, v)`` for sampled
  admissible directions ``v``,
* balance: ``<force, rate> = potential(zeta, rate)`` along the
  trajectory's own rate,

where ``force`` is the negative energy gradient and ``zeta`` the
accumulated history at the start of each step.  Both residuals are
relative and inherit an O(eps + tau) floor from the discretization, so
certificates carry an explicit tolerance.

Rate independence is probed by solving a time-reparametrized copy of
the scenario and comparing against the reparametrized base solution.
The comparison is meaningful for dissipation weights that stay constant
along the run; for genuinely history-dependent weights the accumulation
itself is not reparametrization invariant, and for large viscosity the
discrepancy measures how strongly the regularization breaks rate
independence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .history import HistoryAccumulator
from .spatial import dual_pair, h1_norm
from .dissipation import potential
from .trajectory import Trajectory, c_norm_diff, h1_time_norm
from .viscous import Scenario, SolveReport, driving_force, solve_viscous

__all__ = [
    "DEFAULT_EPS_LEVELS",
    "LimitCertificate",
    "certify_limit",
    "VVResult",
    "vv_sweep",
    "RateIndependenceReport",
    "check_rate_independence",
]

# Default viscosity schedule: geometric halving from 0.1, eight levels.
DEFAULT_EPS_LEVELS = tuple(0.1 * 0.5**k for k in range(8))


@dataclass
class LimitCertificate:
    tolerance: float
    max_stability_violation: float
    max_balance_residual: float
    n_steps_checked: int
    n_directions: int
    passed: bool


def certify_limit(scenario: Scenario, traj: Trajectory, *, tol: float = 1e-2,
                  n_directions: int = 16, seed: int = 0,
                  stride: int = 1) -> LimitCertificate:
    """Check stability and balance of a trajectory as a limit candidate."""
    mesh = scenario.mesh
    tau = traj.tau
    steps = traj.n_steps
    acc = HistoryAccumulator(scenario.kernel, tau, mesh.n_nodes, steps)
    acc.push(traj.values[0])
    rng = np.random.default_rng(seed)

    max_stab = 0.0
    max_bal = 0.0
    checked = 0
    for k in range(steps):
        zeta = acc.value()
        q_next = traj.values[k + 1]
        omega = driving_force(scenario, traj.times[k + 1], q_next)
        rate = (q_next - traj.values[k]) / tau
        lhs = dual_pair(omega, rate)
        rhs = potential(scenario.dissipation, mesh, zeta, rate)
        if math.isinf(rhs):
            max_bal = math.inf
        else:
            max_bal = max(max_bal, abs(lhs - rhs) / (1.0 + abs(lhs) + abs(rhs)))
        if k % stride == 0:
            checked += 1
            for _ in range(n_directions):
                v = rng.standard_normal(mesh.n_nodes)
                if scenario.dissipation.one_sided:
                    v = np.abs(v)
                nv = h1_norm(mesh, v)
                if nv == 0.0:
                    continue
                v = v / nv
                pair = dual_pair(omega, v)
                pot = potential(scenario.dissipation, mesh, zeta, v)
                max_stab = max(max_stab, (pair - pot) / (1.0 + abs(pair) + abs(pot)))
        acc.push(q_next)

    passed = max_stab <= tol and max_bal <= tol
    return LimitCertificate(
        tolerance=float(tol),
        max_stability_violation=float(max_stab),
        max_balance_residual=float(max_bal),
        n_steps_checked=checked,
        n_directions=n_directions,
        passed=bool(passed),
    )


@dataclass
class VVResult:
    eps_values: list
    trajectories: list
    reports: list
    c_diffs: list
    h1_diffs: list
    certificate: LimitCertificate | None

    @property
    def limit(self) -> Trajectory:
        """Finest-viscosity trajectory, the limit candidate."""
        return self.trajectories[-1]


def vv_sweep(scenario: Scenario, eps_values: Sequence[float] | None = None, *,
             certify: bool = True, certificate_tol: float = 1e-2,
             n_directions: int = 16, seed: int = 0,
             warm_start: bool = True) -> VVResult:
    """Solve over a decreasing viscosity schedule and certify the finest."""
    if eps_values is None:
        eps_values = DEFAULT_EPS_LEVELS
    eps_values = [float(e) for e in eps_values]
    if not eps_values:
        raise ValueError("the viscosity schedule is empty")
    if any(e <= 0 for e in eps_values):
        raise ValueError("viscosities must be positive")
    if list(eps_values) != sorted(eps_values, reverse=True):
        raise ValueError("the viscosity schedule must decrease")

    mesh = scenario.mesh
    trajectories = []
    reports = []
    c_diffs = []
    h1_diffs = []
    for eps in eps_values:
        traj, report = solve_viscous(scenario, eps, warm_start=warm_start, seed=seed)
        if trajectories:
            prev = trajectories[-1]
            c_diffs.append(c_norm_diff(mesh, traj, prev))
            diff = Trajectory(times=traj.times, values=traj.values - prev.values)
            h1_diffs.append(h1_time_norm(mesh, diff))
        trajectories.append(traj)
        reports.append(report)

    certificate = None
    if certify:
        certificate = certify_limit(
            scenario, trajectories[-1], tol=certificate_tol,
            n_directions=n_directions, seed=seed,
        )
    return VVResult(
        eps_values=eps_values,
        trajectories=trajectories,
        reports=reports,
        c_diffs=c_diffs,
        h1_diffs=h1_diffs,
        certificate=certificate,
    )


class _MappedLoad:
    """Load precomposed with a time reparametrization."""

    def __init__(self, inner, time_map: Callable[[float], float]):
        self.inner = inner
        self.time_map = time_map

    def value(self, t: float):
        return self.inner.value(float(self.time_map(t)))

    def derivative(self, t: float):
        dt = 1e-6
        return (self.value(t + dt) - self.value(t - dt)) / (2.0 * dt)


@dataclass
class RateIndependenceReport:
    discrepancy: float
    base_sup_norm: float
    eps: float
    horizon: float
    mapped_horizon: float


def check_rate_independence(scenario: Scenario, time_map: Callable[[float], float],
                            new_horizon: float, *, eps: float,
                            n_steps: int | None = None,
                            warm_start: bool = True) -> RateIndependenceReport:
    """Compare the solve of a reparametrized scenario with the
    reparametrized base solve.

    ``time_map`` must be nondecreasing with ``time_map(0) = 0`` and
    ``time_map(new_horizon) <= horizon``.
    """
    base_traj, _ = solve_viscous(scenario, eps, warm_start=warm_start)

    steps = scenario.n_steps if n_steps is None else int(n_steps)
    times2 = np.linspace(0.0, float(new_horizon), steps + 1)
    mapped = np.array([float(time_map(t)) for t in times2])
    if abs(mapped[0]) > 1e-12:
        raise ValueError(f"time map must start at zero, got {mapped[0]}")
    if np.any(np.diff(mapped) < -1e-12):
        raise ValueError("time map must be nondecreasing")
    if mapped[-1] > scenario.horizon * (1.0 + 1e-12):
        raise ValueError(
            f"time map ends at {mapped[-1]}, beyond the horizon {scenario.horizon}"
        )

    scn2 = replace(
        scenario,
        load=_MappedLoad(scenario.load, time_map),
        horizon=float(new_horizon),
        n_steps=steps,
    )
    traj2, _ = solve_viscous(scn2, eps, warm_start=warm_start)

    worst = 0.0
    base_sup = 0.0
    for k, t2 in enumerate(times2):
        ref = base_traj.sample(mapped[k])
        worst = max(worst, h1_norm(scenario.mesh, traj2.values[k] - ref))
        base_sup = max(base_sup, h1_norm(scenario.mesh, ref))
    return RateIndependenceReport(
        discrepancy=float(worst),
        base_sup_norm=float(base_sup),
        eps=float(eps),
        horizon=float(scenario.horizon),
        mapped_horizon=float(new_horizon),
    )
