r"""Local fractional derivative operators of the form ``c_alpha(t) * d/dt``.

Every named operator is an instance of

.. math::

    \frac{d^\alpha}{dt^\alpha} f(t) = c_\alpha(t) \, f'(t)

with a positive, twice continuously differentiable coefficient ``c_alpha``:

============== ==============================================================
kind           coefficient
============== ==============================================================
conformable    ``t^(1-a)``
alternative    ``t^(1-a)`` (same closed form as the conformable derivative)
truncated-m    ``t^(1-a) / gamma(1+b)``
truncated-v    ``t^(1-a) Gamma(beta) (rho)_q / (Gamma(gamma+beta) (delta)_p)``
custom         any user expression in ``t``
============== ==============================================================

For the truncated V-derivative the defining limit

.. math::

    \lim_{\varepsilon \to 0}
        \frac{f(t\, H(\varepsilon t^{-\alpha})) - f(t)}{\varepsilon},
    \qquad H(z) = \Gamma(\beta)\, {}_i\mathbb{E}(z),

is also evaluated numerically (:func:`apply_limit_def`) and serves as an
independent check on the closed form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from fraccurv import expr as ex
from fraccurv.errors import DomainError, InvalidParameterError, NonConvergenceError
from fraccurv.jets import Jet2
from fraccurv.mittag_leffler import MLParams, gamma_fn, h_function, ml_term, pochhammer

__all__ = [
    "OperatorKind",
    "CoefficientFunction",
    "ScalarFunction",
    "LocalFractionalOperator",
    "LimitEstimate",
    "v_coefficient",
    "make_operator",
    "parse_operator_spec",
    "apply",
    "apply_limit_def",
    "value_at_zero",
    "DEFAULT_EPS_SCHEDULE",
    "DEFAULT_T_SCHEDULE",
]

DEFAULT_EPS_SCHEDULE = tuple(1e-2 * 2.0**-k for k in range(7))
DEFAULT_T_SCHEDULE = tuple(10.0**-k for k in range(1, 9))

# coefficient values closer to zero than this make the metric degenerate
DEGENERATE_COEFF = 1e-12

POSITIVE_REALS = (0.0, math.inf)

_V_PARAMS = ("b", "gam", "rho", "delta", "p", "q")
_V_COEFF_TEXT = (
    "t^(1-a) * gamma(b) * (gamma(rho + q) / gamma(rho))"
    " / (gamma(gam + b) * (gamma(delta + p) / gamma(delta)))"
)


class OperatorKind(enum.Enum):
    CONFORMABLE = "conformable"
    ALTERNATIVE = "alternative"
    TRUNCATED_M = "truncated-m"
    TRUNCATED_V = "truncated-v"
    CUSTOM = "custom"


def _check_alpha(alpha) -> float:
    if isinstance(alpha, bool) or not isinstance(alpha, (int, float)):
        raise InvalidParameterError(f"alpha must be a real number, got {alpha!r}")
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0):
        raise InvalidParameterError(f"alpha must lie in (0, 1], got {alpha!r}")
    return alpha


def _check_domain(domain) -> tuple[float, float]:
    lo, hi = (float(v) for v in domain)
    if math.isnan(lo) or math.isnan(hi) or not (lo < hi):
        raise InvalidParameterError(f"domain must be an interval (lo, hi) with lo < hi, got {domain!r}")
    return lo, hi


def _sample_grid(lo: float, hi: float, count: int = 16) -> np.ndarray:
    if math.isfinite(hi):
        return lo + (hi - lo) * (np.arange(count) + 0.5) / count
    return lo + np.logspace(-3.0, 2.0, count)


def _in_open(t: float, domain: tuple[float, float]) -> bool:
    return domain[0] < t < domain[1]


@dataclass(frozen=True)
class CoefficientFunction:
    """A positive C^2 coefficient ``c_alpha(t)`` on an open interval.

    The parameter ``a`` is always bound to ``alpha``. Positivity is
    spot-checked on a sample grid here and enforced again on every evaluation.
    """

    alpha: float
    expr: ex.Expr
    bindings: Mapping[str, float] = field(default_factory=dict)
    domain: tuple[float, float] = POSITIVE_REALS

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_alpha(self.alpha))
        object.__setattr__(self, "domain", _check_domain(self.domain))
        if self.domain[0] < 0.0:
            raise InvalidParameterError("coefficient domain must lie in the positive reals")
        env = {k: float(v) for k, v in self.bindings.items() if k != "a"}
        env["a"] = self.alpha
        object.__setattr__(self, "bindings", MappingProxyType(env))
        missing = ex.params_of(self.expr) - set(env)
        if missing:
            raise InvalidParameterError(f"unbound coefficient parameters: {sorted(missing)}")
        extra_vars = ex.variables_of(self.expr) - {"t"}
        if extra_vars:
            raise InvalidParameterError(f"coefficient may only depend on t, found {sorted(extra_vars)}")
        for t in _sample_grid(*self.domain):
            try:
                self.jet(float(t))
            except DomainError as err:
                raise InvalidParameterError(
                    f"coefficient {self.text!r} is not a positive C^2 function at t={t!r}: {err}"
                ) from None

    @classmethod
    def from_text(cls, text: str, alpha: float, bindings: Mapping[str, float] | None = None,
                  domain=POSITIVE_REALS) -> "CoefficientFunction":
        bindings = dict(bindings or {})
        node = ex.parse(text, params=set(bindings) | {"a"} | set(ex.DEFAULT_PARAMS))
        return cls(alpha, node, bindings, domain)

    @property
    def text(self) -> str:
        return ex.to_text(self.expr)

    def _check_t(self, t: float) -> float:
        t = float(t)
        if not _in_open(t, self.domain):
            raise DomainError(f"t={t!r} is outside the coefficient domain {self.domain}")
        return t

    def _check_value(self, v: float, t: float):
        if not v > DEGENERATE_COEFF:
            raise DomainError(f"coefficient {self.text!r} is not positive at t={t!r} (value {v!r})")

    def jet(self, t: float) -> Jet2:
        t = self._check_t(t)
        j = ex.eval_jet2(self.expr, t, self.bindings)
        self._check_value(j.v, t)
        return j

    def __call__(self, t: float) -> float:
        t = self._check_t(t)
        v = ex.evaluate(self.expr, {"t": t}, self.bindings)
        self._check_value(v, t)
        return v


@dataclass(frozen=True)
class ScalarFunction:
    """A real function of ``t`` given by an expression, evaluable with its derivatives."""

    expr: ex.Expr
    bindings: Mapping[str, float] = field(default_factory=dict)
    domain: tuple[float, float] = POSITIVE_REALS

    def __post_init__(self):
        object.__setattr__(self, "domain", _check_domain(self.domain))
        object.__setattr__(self, "bindings", MappingProxyType(dict(self.bindings)))

    @classmethod
    def from_text(cls, text: str, bindings: Mapping[str, float] | None = None,
                  domain=POSITIVE_REALS) -> "ScalarFunction":
        bindings = dict(bindings or {})
        return cls(ex.parse(text, params=set(bindings)), bindings, domain)

    def _check_t(self, t: float) -> float:
        t = float(t)
        if not _in_open(t, self.domain):
            raise DomainError(f"t={t!r} is outside the function domain {self.domain}")
        return t

    def jet(self, t: float) -> Jet2:
        return ex.eval_jet2(self.expr, self._check_t(t), self.bindings)

    def __call__(self, t: float) -> float:
        return ex.evaluate(self.expr, {"t": self._check_t(t)}, self.bindings)


@dataclass(frozen=True)
class LocalFractionalOperator:
    kind: OperatorKind
    coeff: CoefficientFunction
    ml: MLParams | None = None

    def __post_init__(self):
        if (self.kind is OperatorKind.TRUNCATED_V) != (self.ml is not None):
            raise InvalidParameterError("Mittag-Leffler parameters are required for, and only for, truncated-v")

    @property
    def alpha(self) -> float:
        return self.coeff.alpha

    def __call__(self, f: ScalarFunction, t: float) -> float:
        return apply(self, f, t)


class LimitEstimate(NamedTuple):
    value: float
    error: float


def v_coefficient(params: MLParams, alpha: float, t: float) -> float:
    """Coefficient of ``df/dt`` in the closed form of the truncated V-derivative."""
    alpha = _check_alpha(alpha)
    if not (t > 0 and math.isfinite(t)):
        raise DomainError(f"t must be positive and finite, got {t!r}")
    ratio = gamma_fn(params.beta) * pochhammer(params.rho, params.q, 1)
    ratio /= gamma_fn(params.gamma + params.beta) * pochhammer(params.delta, params.p, 1)
    return t ** (1.0 - alpha) * ratio


def _ml_from_extra(extra: Mapping) -> MLParams:
    if isinstance(extra.get("ml"), MLParams):
        return extra["ml"]
    keys = ("gamma", "beta", "rho", "delta", "p", "q")
    missing = [k for k in keys if k not in extra]
    if missing:
        raise InvalidParameterError(f"truncated-v requires parameters {missing}")
    return MLParams(*(extra[k] for k in keys), trunc=extra.get("trunc", 1))


def make_operator(kind, alpha: float, extra: Mapping | None = None,
                  domain=POSITIVE_REALS) -> LocalFractionalOperator:
    """Build a named operator.

    ``extra`` carries the kind-specific parameters: ``beta`` for truncated-m;
    an :class:`MLParams` under ``ml`` (or its six fields plus ``trunc``) for
    truncated-v; ``expr`` plus any parameter values for custom.
    """
    try:
        kind = OperatorKind(kind)
    except ValueError:
        raise InvalidParameterError(f"unknown operator kind {kind!r}") from None
    alpha = _check_alpha(alpha)
    extra = dict(extra or {})

    if kind in (OperatorKind.CONFORMABLE, OperatorKind.ALTERNATIVE):
        coeff = CoefficientFunction(alpha, ex.parse("t^(1-a)"), {}, domain)
        return LocalFractionalOperator(kind, coeff)

    if kind is OperatorKind.TRUNCATED_M:
        beta = extra.get("beta")
        if beta is None:
            raise InvalidParameterError("truncated-m requires beta")
        if isinstance(beta, bool) or not isinstance(beta, (int, float)) or not (0 < beta < math.inf):
            raise InvalidParameterError(f"truncated-m beta must be positive, got {beta!r}")
        coeff = CoefficientFunction(alpha, ex.parse("t^(1-a)/gamma(1+b)"), {"b": beta}, domain)
        return LocalFractionalOperator(kind, coeff)

    if kind is OperatorKind.TRUNCATED_V:
        ml = _ml_from_extra(extra)
        if ml.trunc < 1:
            raise InvalidParameterError("truncated-v requires trunc >= 1; with trunc=0 the operator vanishes")
        bindings = dict(zip(_V_PARAMS, (ml.beta, ml.gamma, ml.rho, ml.delta, ml.p, ml.q)))
        coeff = CoefficientFunction(alpha, ex.parse(_V_COEFF_TEXT, params=_V_PARAMS + ("a",)), bindings, domain)
        return LocalFractionalOperator(kind, coeff, ml)

    text = extra.pop("expr", None)
    if text is None:
        raise InvalidParameterError("custom operator requires an expression")
    if isinstance(text, str):
        coeff = CoefficientFunction.from_text(text, alpha, extra, domain)
    else:
        coeff = CoefficientFunction(alpha, text, extra, domain)
    return LocalFractionalOperator(kind, coeff)


def _parse_assignments(body: str) -> dict[str, float]:
    values = {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        name, sep, value = item.partition("=")
        if not sep:
            raise InvalidParameterError(f"expected name=value, got {item!r}")
        try:
            values[name.strip()] = float(value)
        except ValueError:
            raise InvalidParameterError(f"parameter {name.strip()!r} is not a number: {value!r}") from None
    return values


def parse_operator_spec(spec: str, alpha: float, domain=POSITIVE_REALS) -> LocalFractionalOperator:
    """Build an operator from its command-line form.

    Accepted forms: ``conformable``, ``alternative``, ``truncated-m:beta=<v>``,
    ``truncated-v:gamma=<v>,beta=<v>,rho=<v>,delta=<v>,p=<v>,q=<v>,trunc=<n>``
    and ``custom:<expression>``.
    """
    name, _, body = spec.strip().partition(":")
    name = name.strip().lower()
    if name == "custom":
        if not body.strip():
            raise InvalidParameterError("custom operator requires an expression after 'custom:'")
        return make_operator(OperatorKind.CUSTOM, alpha, {"expr": body}, domain)
    extra = _parse_assignments(body)
    if name == OperatorKind.TRUNCATED_V.value and "trunc" in extra:
        trunc = extra["trunc"]
        if not float(trunc).is_integer():
            raise InvalidParameterError(f"trunc must be an integer, got {trunc!r}")
        extra["trunc"] = int(trunc)
    return make_operator(name, alpha, extra, domain)


def apply(op: LocalFractionalOperator, f: ScalarFunction, t: float) -> float:
    """``c_alpha(t) * f'(t)``."""
    return op.coeff(t) * f.jet(t).d1


def _check_schedule(schedule: Sequence[float], name: str) -> list[float]:
    values = [float(v) for v in schedule]
    if len(values) < 3:
        raise InvalidParameterError(f"{name} needs at least 3 entries")
    if any(not (v > 0 and math.isfinite(v)) for v in values):
        raise InvalidParameterError(f"{name} entries must be positive and finite")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise InvalidParameterError(f"{name} must be strictly decreasing")
    return values


def _extrapolate_to_zero(xs: Sequence[float], ys: Sequence[float]) -> float:
    # Neville's scheme evaluated at x = 0
    p = list(ys)
    n = len(xs)
    for level in range(1, n):
        for i in range(n - level):
            x0, x1 = xs[i], xs[i + level]
            p[i] = (x0 * p[i + 1] - x1 * p[i]) / (x0 - x1)
    return p[0]


def _series_growth(params: MLParams) -> float:
    """Reciprocal radius on which the truncated series departs from its linear part.

    With coefficients ``c_k`` of ``H``, this is ``max_k |c_k / c_1| ** (1 / (k - 1))``
    for ``k >= 2``. The default schedule is divided by it so that the quadratic
    and higher terms stay small across every step.
    """
    c1 = abs(ml_term(params, 1.0, 1))
    growth = 0.0
    for k in range(2, params.trunc + 1):
        growth = max(growth, (abs(ml_term(params, 1.0, k)) / c1) ** (1.0 / (k - 1)))
    return growth


def apply_limit_def(
    params: MLParams,
    alpha: float,
    f: ScalarFunction,
    t: float,
    eps_schedule: Sequence[float] | None = None,
    tol: float = 1e-6,
) -> LimitEstimate:
    """Evaluate the truncated V-derivative from its defining limit.

    Difference quotients over the decreasing ``eps_schedule`` are combined by
    two levels of Richardson extrapolation. Without a schedule, the default
    halving sequence is shrunk by the growth rate of the series coefficients
    times ``t**-alpha``. Steps whose inner argument
    ``t * H(eps * t**-alpha)`` leaves the domain of ``f`` are dropped from the
    front of the schedule.
    """
    alpha = _check_alpha(alpha)
    t = float(t)
    if not t > 0:
        raise DomainError(f"t must be positive, got {t!r}")
    scale = t**-alpha
    if eps_schedule is None:
        shrink = max(1.0, scale * _series_growth(params))
        eps_schedule = [e / shrink for e in DEFAULT_EPS_SCHEDULE]
    eps = _check_schedule(eps_schedule, "eps_schedule")
    ft = f(t)

    quotients: list[tuple[float, float]] = []
    for e in eps:
        arg = t * h_function(params, e * scale)
        if not _in_open(arg, f.domain):
            if quotients:
                raise DomainError(f"inner argument {arg!r} left the domain of f mid-schedule")
            continue
        quotients.append((e, (f(arg) - ft) / e))
    if len(quotients) < 3:
        raise DomainError("fewer than 3 schedule steps keep t*H(eps*t^-alpha) inside the domain of f")

    xs = [q[0] for q in quotients]
    ys = [q[1] for q in quotients]
    level2 = [_extrapolate_to_zero(xs[i:i + 3], ys[i:i + 3]) for i in range(len(xs) - 2)]
    value = level2[-1]
    if len(level2) > 1:
        error = abs(level2[-1] - level2[-2])
        compared = (level2[-2], level2[-1])
    else:
        level1 = _extrapolate_to_zero(xs[-2:], ys[-2:])
        error = abs(value - level1)
        compared = (level1, value)
    if not math.isfinite(value) or error > tol * max(1.0, abs(value)):
        raise NonConvergenceError(
            f"limit definition did not stabilise within {tol} (estimate {error!r})", compared
        )
    return LimitEstimate(value, error)


def value_at_zero(
    op: LocalFractionalOperator,
    f: ScalarFunction,
    t_schedule: Sequence[float] | None = None,
    tol: float = 1e-6,
) -> float:
    """Right limit of ``apply(op, f, t)`` as ``t -> 0+``."""
    ts = _check_schedule(DEFAULT_T_SCHEDULE if t_schedule is None else t_schedule, "t_schedule")
    values = []
    for t in ts:
        v = apply(op, f, t)
        if not math.isfinite(v):
            raise NonConvergenceError(f"derivative is not finite at t={t!r}", tuple(values[-1:]) + (v,))
        values.append(v)
    last, prev = values[-1], values[-2]
    if abs(last - prev) > tol:
        raise NonConvergenceError(
            f"no limit at 0+: last two values {prev!r} and {last!r} differ by more than {tol}",
            (prev, last),
        )
    return last
