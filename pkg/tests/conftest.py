import math

import numpy as np
import pytest

from fraccurv.fracderiv import make_operator
from fraccurv.mittag_leffler import MLParams

ACCEPTANCE_LINES: list[str] = []

ALPHAS = tuple(round(0.1 * k, 1) for k in range(1, 11))


def random_ml_params(seed: int) -> MLParams:
    rng = np.random.default_rng(seed)
    vals = rng.uniform(0.5, 2.5, size=6)
    return MLParams(*vals, trunc=int(rng.integers(1, 7)))


# two fixed "randomized" truncated-V parameter sets
ML_SETS = (random_ml_params(11), random_ml_params(12))


def operator_family(alpha: float):
    """All operator families used by the flatness checks, as (label, operator)."""
    ops = [
        ("conformable", make_operator("conformable", alpha)),
        ("alternative", make_operator("alternative", alpha)),
    ]
    for beta in (0.5, 1.0, 2.0):
        ops.append((f"truncated-m beta={beta}", make_operator("truncated-m", alpha, {"beta": beta})))
    for k, ml in enumerate(ML_SETS):
        ops.append((f"truncated-v set {k}", make_operator("truncated-v", alpha, {"ml": ml})))
    ops.append(("custom exp(t)", make_operator("custom", alpha, {"expr": "exp(t)"})))
    ops.append(("custom 1+t^2", make_operator("custom", alpha, {"expr": "1+t^2"})))
    return ops


def random_expression(rng, depth=3):
    """Text of a random expression that is smooth and finite for t in [0.5, 2]."""

    def const():
        return f"{rng.uniform(0.5, 2.0):.3f}"

    def positive(d):
        if d == 0:
            return rng.choice(["t", const(), "a"])
        choice = rng.integers(7)
        if choice == 0:
            return f"(1 + ({anything(d - 1)})^2)"
        if choice == 1:
            return f"({positive(d - 1)} * {positive(d - 1)})"
        if choice == 2:
            return f"({positive(d - 1)} / {positive(d - 1)})"
        if choice == 3:
            return f"({positive(d - 1)})^{rng.uniform(-2, 2):.3f}"
        if choice == 4:
            return f"exp(sin({anything(d - 1)}))"
        if choice == 5:
            return f"({positive(d - 1)} + {positive(d - 1)})"
        return f"({positive(d - 1)})^(cos({anything(d - 1)}))"

    def anything(d):
        if d == 0:
            return rng.choice(["t", const(), "a"])
        choice = rng.integers(7)
        if choice == 0:
            return f"sin({anything(d - 1)})"
        if choice == 1:
            return f"cos({anything(d - 1)})"
        if choice == 2:
            return f"ln({positive(d - 1)})"
        if choice == 3:
            return f"({anything(d - 1)} - {anything(d - 1)})"
        if choice == 4:
            return f"({anything(d - 1)} * {anything(d - 1)})"
        if choice == 5:
            return f"(-({anything(d - 1)}))"
        return positive(d)

    return anything(depth)


def corpus(seed=7, size=1000):
    rng = np.random.default_rng(seed)
    return [(random_expression(rng, int(rng.integers(1, 5))), float(rng.uniform(0.5, 2.0)),
             float(rng.uniform(0.1, 1.0))) for _ in range(size)]


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def close(a, b, rel, abs_=0.0):
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_)
