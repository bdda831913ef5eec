"""Shared scenario builders for the test suite."""

import numpy as np

from histris import (
    Fatigue,
    Scenario,
    build_mesh,
    constant_in_space_load,
    identity_kernel,
)


def constant_threshold(value=1.0):
    """History-independent one-sided dissipation with a flat threshold."""
    return Fatigue(
        kappa=lambda z, v=value: np.full_like(np.asarray(z, dtype=float), v),
        lipschitz=0.0,
    )


def scalar_scenario(a, a_prime=None, *, threshold=1.0, alpha=1.0, horizon=1.0,
                    n_steps=1000, n_nodes=5):
    """Spatially constant problem; reduces exactly to scalar dynamics."""
    mesh = build_mesh(n_nodes)
    return Scenario(
        mesh=mesh,
        alpha=alpha,
        load=constant_in_space_load(mesh, a, a_prime),
        kernel=identity_kernel(np.zeros(n_nodes)),
        dissipation=constant_threshold(threshold),
        horizon=horizon,
        n_steps=n_steps,
    )
