from __future__ import annotations

import math

import numpy as np
import pytest

from idsflow.backend.errors import ConfigInvalid, ShapeMismatch, UninitializedState
from idsflow.backend.optim import (
    OPTIMIZER_KINDS,
    HyperParams,
    Optimizer,
    clip_global_norm,
    global_norm,
    init_state,
    step,
)


def _scalar_reference(kind: str, hp: HyperParams, theta: float, steps: int) -> list[float]:
    """Plain-float rendition of each rule minimizing θ², for comparison."""
    lr, b1, b2, rho, eps = hp.learning_rate, hp.beta1, hp.beta2, hp.rho, hp.epsilon
    a = b = 0.0
    out = []
    for t in range(1, steps + 1):
        g = 2.0 * theta
        if kind == "sgd":
            theta -= lr * g
        elif kind == "adagrad":
            a += g * g
            theta -= lr * g / (math.sqrt(a) + eps)
        elif kind == "rmsprop":
            a = rho * a + (1 - rho) * g * g
            theta -= lr * g / (math.sqrt(a) + eps)
        elif kind == "adadelta":
            a = rho * a + (1 - rho) * g * g
            delta = math.sqrt(b + eps) / math.sqrt(a + eps) * g
            b = rho * b + (1 - rho) * delta * delta
            theta -= lr * delta
        elif kind == "adam":
            a = b1 * a + (1 - b1) * g
            b = b2 * b + (1 - b2) * g * g
            theta -= lr * (a / (1 - b1**t)) / (math.sqrt(b / (1 - b2**t)) + eps)
        elif kind == "adamax":
            a = b1 * a + (1 - b1) * g
            b = max(b2 * b, abs(g))
            theta -= lr / (1 - b1**t) * a / (b + eps)
        elif kind == "nadam":
            a = b1 * a + (1 - b1) * g
            b = b2 * b + (1 - b2) * g * g
            m_hat = b1 * a / (1 - b1 ** (t + 1)) + (1 - b1) * g / (1 - b1**t)
            theta -= lr * m_hat / (math.sqrt(b / (1 - b2**t)) + eps)
        out.append(theta)
    return out


@pytest.mark.parametrize("kind", OPTIMIZER_KINDS)
def test_ten_steps_on_quadratic_match_reference(kind: str) -> None:
    hp = HyperParams.for_kind(kind, learning_rate=0.05)
    theta = np.array([1.0])
    opt = Optimizer(kind, {"theta": theta}, hp)
    trajectory = []
    for _ in range(10):
        opt.step({"theta": 2.0 * theta})
        trajectory.append(float(theta[0]))
    expected = _scalar_reference(kind, hp, 1.0, 10)
    assert trajectory == pytest.approx(expected, abs=1e-10)
    assert opt.state.t == 10


def test_first_adam_step_moves_by_learning_rate() -> None:
    theta = np.array([1.0, -3.0])
    Optimizer("adam", {"w": theta}, HyperParams.for_kind("adam")).step({"w": 2.0 * theta})
    assert theta.tolist() == pytest.approx([1.0 - 0.002, -3.0 + 0.002], abs=1e-9)


def test_sgd_converges_on_quadratic() -> None:
    theta = np.array([1.0])
    opt = Optimizer("sgd", {"theta": theta}, HyperParams.for_kind("sgd", learning_rate=0.1))
    for n in range(1, 501):
        opt.step({"theta": 2.0 * theta})
        if abs(theta[0]) < 1e-3:
            break
    assert abs(theta[0]) < 1e-3
    assert n == 31  # θ shrinks by 0.8 per step


def test_defaults_per_kind() -> None:
    assert HyperParams.for_kind("adam").learning_rate == 0.002
    assert HyperParams.for_kind("adadelta").learning_rate == 1.0
    assert HyperParams.for_kind("rmsprop", rho=0.5).rho == 0.5


@pytest.mark.parametrize(
    "overrides",
    [{"learning_rate": 0.0}, {"beta1": 1.0}, {"rho": -0.1}, {"epsilon": 0.0}],
)
def test_invalid_hyperparams(overrides: dict) -> None:
    with pytest.raises(ConfigInvalid):
        HyperParams.for_kind("adam", **overrides).validate()


def test_step_checks_state_and_shapes() -> None:
    params = {"w": np.zeros(3)}
    state = init_state("adam", {"w": (3,)})
    with pytest.raises(UninitializedState):
        step("rmsprop", params, {"w": np.zeros(3)}, state, HyperParams())
    with pytest.raises(ShapeMismatch):
        step("adam", params, {"w": np.zeros(4)}, state, HyperParams())
    with pytest.raises(ConfigInvalid):
        init_state("lbfgs", {"w": (3,)})  # type: ignore[arg-type]


def test_step_leaves_gradients_untouched() -> None:
    params = {"w": np.ones(2)}
    grads = {"w": np.array([0.5, -0.5])}
    Optimizer("nadam", params).step(grads)
    assert grads["w"].tolist() == [0.5, -0.5]


def test_clip_global_norm() -> None:
    grads = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert global_norm(grads) == 5.0
    clipped, norm = clip_global_norm(grads, 1.0)
    assert norm == 5.0
    assert global_norm(clipped) == pytest.approx(1.0)
    assert clipped["a"][0] == pytest.approx(0.6)
    same, _ = clip_global_norm(grads, None)
    assert same["a"] is grads["a"]
    unchanged, _ = clip_global_norm(grads, 10.0)
    assert unchanged["b"][0] == 4.0


# θ=1, g=2, each kind's default hyperparameters, evaluated by hand at t=1
FIRST_STEP = {
    "sgd": 0.996,
    "adagrad": 0.998,
    "rmsprop": 1.0 - 0.004 / math.sqrt(0.2),
    "adadelta": 1.0 - 2e-4 / math.sqrt(0.2),
    "adam": 0.998,
    "adamax": 0.998,
    "nadam": 1.0 - 0.001 * (0.18 / 0.19 + 2.0),
}


@pytest.mark.parametrize("kind", OPTIMIZER_KINDS)
def test_first_step_from_defaults(kind: str) -> None:
    theta = np.array([1.0])
    Optimizer(kind, {"theta": theta}).step({"theta": np.array([2.0])})
    assert theta[0] == pytest.approx(FIRST_STEP[kind], abs=1e-8)


def test_adamax_first_step_with_half_gradient() -> None:
    theta = np.array([1.0])
    Optimizer("adamax", {"theta": theta}).step({"theta": np.array([0.5])})
    assert theta[0] == pytest.approx(0.998, abs=1e-9)


@pytest.mark.parametrize("kind", ["adam", "adamax", "nadam"])
def test_first_step_ignores_gradient_scale(kind: str) -> None:
    moved = []
    for g in (0.5, 500.0):
        theta = np.array([1.0])
        Optimizer(kind, {"theta": theta}).step({"theta": np.array([g])})
        moved.append(1.0 - theta[0])
    assert moved[0] == pytest.approx(moved[1], rel=1e-6)
    assert moved[0] > 0


@pytest.mark.parametrize("kind", OPTIMIZER_KINDS)
def test_zero_gradient_on_fresh_state_keeps_params(kind: str) -> None:
    theta = np.array([1.5, -2.0])
    Optimizer(kind, {"theta": theta}).step({"theta": np.zeros(2)})
    assert theta.tolist() == [1.5, -2.0]


@pytest.mark.parametrize("kind", OPTIMIZER_KINDS)
def test_defaults_move_toward_minimum_over_500_steps(kind: str) -> None:
    theta = np.array([5.0])
    opt = Optimizer(kind, {"theta": theta})
    for _ in range(500):
        opt.step({"theta": 2.0 * theta})
    assert abs(theta[0]) < 5.0
