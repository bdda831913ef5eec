import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from histris.history import (
    HistoryAccumulator,
    KernelSpec,
    convolution_kernel,
    history_derivative,
    history_eval,
    identity_kernel,
)

from oracles import convolution_history_ramp


def _ramp_samples(n_steps, n_nodes=4, horizon=1.0):
    times = np.linspace(0.0, horizon, n_steps + 1)
    values = np.outer(times, np.ones(n_nodes))  # y(s) = s at every node
    return times, values


def test_identity_constant_is_exact():
    # trapezoid quadrature integrates constants exactly
    kernel = identity_kernel(np.full(3, 0.5))
    times = np.linspace(0.0, 2.0, 11)
    values = np.tile([1.0, -2.0, 3.0], (11, 1))
    out = history_eval(kernel, times, values, 10)
    assert_allclose(out, [0.5 + 2.0, 0.5 - 4.0, 0.5 + 6.0], atol=1e-14)


def test_identity_linear_is_exact():
    # and linears: integral of s over [0, t] is t^2/2
    kernel = identity_kernel(np.zeros(4))
    times, values = _ramp_samples(20)
    for k in (5, 13, 20):
        t = times[k]
        assert_allclose(history_eval(kernel, times, values, k),
                        np.full(4, 0.5 * t * t), atol=1e-14)


def test_identity_derivative_is_current_sample():
    kernel = identity_kernel(np.zeros(2))
    times = np.linspace(0.0, 1.0, 6)
    values = np.column_stack([np.sin(times), np.cos(times)])
    for k in range(6):
        assert_allclose(history_derivative(kernel, times, values, k), values[k])


def test_index_zero_returns_initial_state():
    kernel = identity_kernel(np.array([7.0, -1.0]))
    times, values = _ramp_samples(8, n_nodes=2)
    assert_allclose(history_eval(kernel, times, values, 0), [7.0, -1.0])


def test_convolution_matches_closed_form_second_order():
    # kernel exp(-r) against y(s) = s has an elementary antiderivative
    y0 = 0.25
    errs = []
    for n_steps in (50, 100):
        kernel = convolution_kernel(
            lambda r: np.exp(-r), lambda r: -np.exp(-r), np.full(2, y0)
        )
        times, values = _ramp_samples(n_steps, n_nodes=2)
        got = history_eval(kernel, times, values, n_steps)
        want = convolution_history_ramp(1.0, y0)
        errs.append(abs(got[0] - want))
        # trapezoid bound: |E| <= h^2 max|f''| / 12 with max|f''| = 3
        assert_allclose(got, np.full(2, want), atol=0.25 / n_steps ** 2)
    # halving the step should cut the trapezoid error about fourfold
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)


def test_convolution_derivative_matches_closed_form():
    # d/dt [t - 1 + exp(-t)] = 1 - exp(-t)
    kernel = convolution_kernel(
        lambda r: np.exp(-r), lambda r: -np.exp(-r), np.zeros(2)
    )
    times, values = _ramp_samples(200, n_nodes=2)
    for k in (60, 140, 200):
        t = times[k]
        got = history_derivative(kernel, times, values, k)
        assert_allclose(got, np.full(2, 1.0 - math.exp(-t)), atol=5e-5)


def test_accumulator_agrees_with_direct_evaluation(rng):
    times = np.linspace(0.0, 1.0, 41)
    values = rng.standard_normal((41, 3))

    ident = identity_kernel(rng.standard_normal(3))
    acc = HistoryAccumulator(ident, times[1] - times[0], 3, 40)
    for k in range(41):
        acc.push(values[k])
        assert_allclose(acc.value(), history_eval(ident, times, values, k),
                        atol=1e-14)
        assert_allclose(acc.derivative(),
                        history_derivative(ident, times, values, k), atol=1e-14)

    conv = convolution_kernel(lambda r: np.exp(-0.5 * r),
                              lambda r: -0.5 * np.exp(-0.5 * r),
                              rng.standard_normal(3))
    acc = HistoryAccumulator(conv, times[1] - times[0], 3, 40)
    for k in range(41):
        acc.push(values[k])
        assert_allclose(acc.value(), history_eval(conv, times, values, k),
                        atol=1e-12)
        assert_allclose(acc.derivative(),
                        history_derivative(conv, times, values, k), atol=1e-12)


def test_accumulator_capacity_and_time():
    acc = HistoryAccumulator(identity_kernel(np.zeros(1)), 0.5, 1, 2)
    acc.push(np.zeros(1))
    acc.push(np.ones(1))
    assert acc.n_samples == 2
    assert acc.time == pytest.approx(0.5)
    acc.push(np.ones(1))
    with pytest.raises(ValueError):
        acc.push(np.ones(1))


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec(kind="nope", y0=np.zeros(2))
    with pytest.raises(ValueError):
        KernelSpec(kind="convolution", y0=np.zeros(2))  # missing kernel
    ident = identity_kernel(np.zeros(2))
    assert ident.kind == "identity"
    conv = convolution_kernel(lambda r: r, lambda r: 1.0, np.zeros(2))
    assert conv.kind == "convolution"
