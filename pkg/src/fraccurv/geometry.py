r"""Metrics, Christoffel symbols and Riemann curvature on coordinate patches.

Index conventions (all arrays are 0-based):

* ``ChristoffelValues.values[k, i, j]`` is :math:`\Gamma^k_{ij}`.
* ``RiemannValues.values[i, j, k, l]`` is :math:`R^i_{jkl}` with
  :math:`R(\partial_k, \partial_l)\partial_j = \sum_i R^i_{jkl}\partial_i` and

  .. math::

      R^i_{jkl} = \partial_l \Gamma^i_{kj} - \partial_k \Gamma^i_{lj}
          + \sum_m \Gamma^i_{lm}\Gamma^m_{kj} - \sum_m \Gamma^i_{km}\Gamma^m_{lj}.

  This is the negative of the other widespread sign convention; for the
  unit sphere ``diag(1, sin(x1)^2)`` it gives ``R^1_212 = -sin(x1)^2``.

The alpha-metric attached to coefficient functions ``c_1 .. c_n`` is
``g = diag(1/c_1(x_1)^2, ..., 1/c_n(x_n)^2)``.
"""

from __future__ import annotations

import enum
import itertools
import math
import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence, Union

import numpy as np
from scipy import integrate

from fraccurv import expr as ex
from fraccurv.errors import (
    DomainError,
    DomainExitError,
    GridPointError,
    InvalidParameterError,
    NotPositiveDefiniteError,
    QuadratureError,
)
from fraccurv.fracderiv import (
    CoefficientFunction,
    LocalFractionalOperator,
    parse_operator_spec,
)

__all__ = [
    "Mode",
    "DiagonalMetric",
    "GeneralMetric",
    "ChristoffelValues",
    "RiemannValues",
    "FlatnessReport",
    "metric_at",
    "christoffel_general",
    "christoffel_diagonal",
    "riemann",
    "flatness_scan",
    "isometry_map",
    "isometry_jacobian",
    "geodesic_integrate",
    "metric_from_spec",
    "FD_STEP",
]

FD_STEP = 1e-4
_SQRT_EPS = math.sqrt(np.finfo(float).eps)


class Mode(enum.Enum):
    CLOSED_FORM = "closed-form"
    FINITE_DIFFERENCE = "finite-difference"


def _point(x) -> tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(x, dtype=float).ravel())


@dataclass(frozen=True)
class DiagonalMetric:
    """The alpha-metric ``sum_i dx_i^2 / c_i(x_i)^2``; one coefficient per axis."""

    coeffs: tuple[CoefficientFunction, ...]

    def __post_init__(self):
        coeffs = tuple(self.coeffs)
        if len(coeffs) < 2:
            raise InvalidParameterError("a diagonal metric needs dimension n >= 2")
        if len({c.alpha for c in coeffs}) != 1:
            raise InvalidParameterError("all coefficient functions must share the same alpha")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_operator(cls, op: LocalFractionalOperator, n: int) -> "DiagonalMetric":
        return cls((op.coeff,) * n)

    @property
    def n(self) -> int:
        return len(self.coeffs)

    @property
    def alpha(self) -> float:
        return self.coeffs[0].alpha

    def check_point(self, x) -> tuple[float, ...]:
        x = _point(x)
        if len(x) != self.n:
            raise DomainError(f"expected a point with {self.n} coordinates, got {len(x)}")
        return x

    def coefficient_jets(self, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Arrays of ``c_i(x_i)``, ``c_i'(x_i)`` and ``c_i''(x_i)``."""
        x = self.check_point(x)
        jets = [c.jet(xi) for c, xi in zip(self.coeffs, x)]
        return (
            np.array([j.v for j in jets]),
            np.array([j.d1 for j in jets]),
            np.array([j.d2 for j in jets]),
        )

    def derivatives(self, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``g``, ``dg[l, i, j] = d_l g_ij`` and ``d2g[l, m, i, j] = d_l d_m g_ij``."""
        c, c1, c2 = self.coefficient_jets(x)
        n = self.n
        g = np.diag(c**-2.0)
        dg = np.zeros((n, n, n))
        d2g = np.zeros((n, n, n, n))
        idx = np.arange(n)
        dg[idx, idx, idx] = -2.0 * c1 / c**3
        d2g[idx, idx, idx, idx] = -2.0 * c2 / c**3 + 6.0 * c1**2 / c**4
        return g, dg, d2g


@dataclass(frozen=True)
class GeneralMetric:
    """A symmetric metric field whose components are expressions in ``x1..xn``."""

    components: tuple[tuple[ex.Expr, ...], ...]
    bindings: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.components)
        n = len(rows)
        if n < 2:
            raise InvalidParameterError("a general metric needs dimension n >= 2")
        if any(len(r) != n for r in rows):
            raise InvalidParameterError("metric components must form a square matrix")
        for i in range(n):
            for j in range(i + 1, n):
                if rows[i][j] != rows[j][i]:
                    raise InvalidParameterError(
                        f"metric is not symmetric: g[{i + 1}][{j + 1}] != g[{j + 1}][{i + 1}]"
                    )
        object.__setattr__(self, "components", rows)
        object.__setattr__(self, "bindings", MappingProxyType(dict(self.bindings)))
        allowed = set(self.variables)
        for r in rows:
            for node in r:
                stray = ex.variables_of(node) - allowed
                if stray:
                    raise InvalidParameterError(f"unknown coordinates {sorted(stray)}")
                missing = ex.params_of(node) - set(self.bindings)
                if missing:
                    raise InvalidParameterError(f"unbound metric parameters: {sorted(missing)}")

    @classmethod
    def from_text(cls, rows: Sequence[Sequence[str]], bindings: Mapping[str, float] | None = None
                  ) -> "GeneralMetric":
        bindings = dict(bindings or {})
        variables = tuple(f"x{i + 1}" for i in range(len(rows)))
        parsed = tuple(
            tuple(ex.parse(text, params=set(bindings), variables=variables) for text in row)
            for row in rows
        )
        return cls(parsed, bindings)

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(f"x{i + 1}" for i in range(self.n))

    def check_point(self, x) -> tuple[float, ...]:
        x = _point(x)
        if len(x) != self.n:
            raise DomainError(f"expected a point with {self.n} coordinates, got {len(x)}")
        return x

    def derivatives(self, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = self.check_point(x)
        n = self.n
        point = dict(zip(self.variables, x))
        g = np.empty((n, n))
        dg = np.empty((n, n, n))
        d2g = np.empty((n, n, n, n))
        for i in range(n):
            for j in range(i, n):
                jet = ex.eval_jet(self.components[i][j], point, self.variables, self.bindings)
                g[i, j] = g[j, i] = jet.v
                dg[:, i, j] = dg[:, j, i] = jet.g
                d2g[:, :, i, j] = d2g[:, :, j, i] = jet.h
        return g, dg, d2g


Metric = Union[DiagonalMetric, GeneralMetric]


@dataclass(frozen=True)
class ChristoffelValues:
    point: tuple[float, ...]
    values: np.ndarray  # values[k, i, j] = Gamma^k_ij


@dataclass(frozen=True)
class RiemannValues:
    point: tuple[float, ...]
    values: np.ndarray  # values[i, j, k, l] = R^i_jkl

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def component(self, i: int, j: int, k: int, l: int) -> float:
        """``R^i_jkl`` with 1-based indices, as in index notation."""
        return float(self.values[i - 1, j - 1, k - 1, l - 1])

    def nonzero(self, tol: float = 0.0) -> list[tuple[tuple[int, int, int, int], float]]:
        """1-based indices and values of the components with ``|R| > tol``."""
        out = []
        for idx in zip(*np.nonzero(np.abs(self.values) > tol)):
            out.append((tuple(int(v) + 1 for v in idx), float(self.values[idx])))
        return out


def _check_positive_definite(g: np.ndarray, x):
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(f"metric is not positive definite at {_point(x)}") from None


def metric_at(metric: Metric, x) -> tuple[np.ndarray, np.ndarray]:
    """Metric matrix and its inverse at ``x``."""
    if isinstance(metric, DiagonalMetric):
        c, _, _ = metric.coefficient_jets(x)
        return np.diag(c**-2.0), np.diag(c**2)
    g, _, _ = metric.derivatives(x)
    _check_positive_definite(g, x)
    return g, np.linalg.solve(g, np.eye(metric.n))


def _christoffel_from(g, dg, d2g=None, *, ginv=None):
    if ginv is None:
        ginv = np.linalg.solve(g, np.eye(g.shape[0]))
    # b[i, j, m] = d_i g_jm + d_j g_im - d_m g_ij
    b = dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0)
    gam = 0.5 * np.einsum("km,ijm->kij", ginv, b)
    if d2g is None:
        return gam, None
    dginv = -np.einsum("ka,lab,bm->lkm", ginv, dg, ginv)
    db = d2g + d2g.transpose(0, 2, 1, 3) - d2g.transpose(0, 2, 3, 1)
    dgam = 0.5 * (np.einsum("lkm,ijm->lkij", dginv, b) + np.einsum("km,lijm->lkij", ginv, db))
    return gam, dgam


def _metric_christoffel(metric: Metric, x, with_derivative: bool):
    g, dg, d2g = metric.derivatives(x)
    if isinstance(metric, GeneralMetric):
        _check_positive_definite(g, x)
    return _christoffel_from(g, dg, d2g if with_derivative else None)


def christoffel_general(metric: Metric, x) -> ChristoffelValues:
    """Christoffel symbols from the full Levi-Civita formula."""
    x = metric.check_point(x)
    gam, _ = _metric_christoffel(metric, x, False)
    return ChristoffelValues(x, gam)


def christoffel_diagonal(metric: DiagonalMetric, x) -> ChristoffelValues:
    """Closed form for the alpha-metric: only ``Gamma^i_ii = -c_i'/c_i`` is nonzero."""
    x = metric.check_point(x)
    c, c1, _ = metric.coefficient_jets(x)
    n = metric.n
    gam = np.zeros((n, n, n))
    idx = np.arange(n)
    gam[idx, idx, idx] = -c1 / c
    return ChristoffelValues(x, gam)


def _diagonal_gamma_arrays(c, c1, c2):
    # leading axes of c, c1, c2 are batch axes; last axis is the coordinate
    n = c.shape[-1]
    batch = c.shape[:-1]
    ratio = c1 / c
    gam = np.zeros(batch + (n, n, n))
    dgam = np.zeros(batch + (n, n, n, n))
    idx = np.arange(n)
    gam[..., idx, idx, idx] = -ratio
    dgam[..., idx, idx, idx, idx] = -(c2 / c - ratio**2)
    return gam, dgam


def _riemann_from(gam, dgam):
    # gam[..., k, i, j] = Gamma^k_ij, dgam[..., l, k, i, j] = d_l Gamma^k_ij
    return (
        np.einsum("...likj->...ijkl", dgam)
        - np.einsum("...kilj->...ijkl", dgam)
        + np.einsum("...ilm,...mkj->...ijkl", gam, gam)
        - np.einsum("...ikm,...mlj->...ijkl", gam, gam)
    )


def _fd_steps(x, h: float | None) -> np.ndarray:
    rel = FD_STEP if h is None else float(h)
    if not rel > 0:
        raise InvalidParameterError(f"finite-difference step must be positive, got {h!r}")
    if rel < _SQRT_EPS:
        warnings.warn(
            f"finite-difference step {rel:g} is below sqrt(machine epsilon); "
            "cancellation will consume more than half of the working digits",
            RuntimeWarning,
            stacklevel=3,
        )
    return rel * np.maximum(1.0, np.abs(np.asarray(x)))


def riemann(metric: Metric, x, mode: Mode | str = Mode.CLOSED_FORM, h: float | None = None
            ) -> RiemannValues:
    """Riemann curvature components at ``x``.

    ``closed-form`` differentiates the Christoffel symbols through order-2
    jets. ``finite-difference`` takes central differences of
    :func:`christoffel_general` with step ``h * max(1, |x_l|)`` along each axis
    (``h`` defaults to :data:`FD_STEP`) and is independent of the jet path for
    the derivative terms.
    """
    mode = Mode(mode)
    x = metric.check_point(x)
    if mode is Mode.CLOSED_FORM:
        if isinstance(metric, DiagonalMetric):
            gam, dgam = _diagonal_gamma_arrays(*metric.coefficient_jets(x))
        else:
            gam, dgam = _metric_christoffel(metric, x, True)
        return RiemannValues(x, _riemann_from(gam, dgam))

    steps = _fd_steps(x, h)
    n = metric.n
    base = np.asarray(x)
    gam = christoffel_general(metric, base).values
    dgam = np.empty((n, n, n, n))
    for l in range(n):
        e = np.zeros(n)
        e[l] = steps[l]
        plus = christoffel_general(metric, base + e).values
        minus = christoffel_general(metric, base - e).values
        dgam[l] = (plus - minus) / (2.0 * steps[l])
    return RiemannValues(x, _riemann_from(gam, dgam))


@dataclass(frozen=True)
class FlatnessReport:
    max_abs_R: float
    argmax_point: tuple[float, ...]
    passed: bool
    tol: float
    mode: str
    points: int
    per_point: tuple[tuple[tuple[float, ...], float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "max_abs_R": self.max_abs_R,
            "argmax_point": list(self.argmax_point),
            "pass": self.passed,
            "tol": self.tol,
            "mode": self.mode,
            "points": self.points,
        }


def _grid_axes(metric: Metric, grid) -> list[np.ndarray]:
    axes = [np.asarray(a, dtype=float).ravel() for a in grid]
    if len(axes) == 1 and metric.n > 1:
        axes = axes * metric.n
    if len(axes) != metric.n:
        raise InvalidParameterError(f"grid has {len(axes)} axes, metric has dimension {metric.n}")
    if any(a.size == 0 for a in axes):
        raise InvalidParameterError("grid axes must be non-empty")
    return axes


def flatness_scan(
    metric: Metric,
    grid: Sequence[Sequence[float]],
    tol: float = 1e-9,
    mode: Mode | str = Mode.CLOSED_FORM,
    h: float | None = None,
    keep_points: bool = False,
) -> FlatnessReport:
    """Maximum ``|R^i_jkl|`` over the tensor-product grid.

    ``grid`` holds one list of coordinates per axis (a single list is reused
    for every axis). Points are visited in lexicographic index order and ties
    in the maximum keep the first point visited.
    """
    mode = Mode(mode)
    if not tol > 0:
        raise InvalidParameterError(f"tolerance must be positive, got {tol!r}")
    axes = _grid_axes(metric, grid)
    points = list(itertools.product(*axes))

    if mode is Mode.CLOSED_FORM and isinstance(metric, DiagonalMetric):
        # the coefficient on axis i depends on x_i only, so evaluate each axis once
        tables = []
        for i, (coeff, axis) in enumerate(zip(metric.coeffs, axes)):
            rows = []
            for v in axis:
                try:
                    j = coeff.jet(v)
                except DomainError as err:
                    bad = tuple(float(a[0]) for a in axes)
                    bad = bad[:i] + (float(v),) + bad[i + 1:]
                    raise GridPointError(str(err), bad) from err
                rows.append((j.v, j.d1, j.d2))
            tables.append(np.array(rows))
        index = np.array(list(itertools.product(*(range(a.size) for a in axes))))
        cols = [np.stack([tables[i][index[:, i], m] for i in range(metric.n)], axis=-1) for m in range(3)]
        gam, dgam = _diagonal_gamma_arrays(*cols)
        maxima = np.abs(_riemann_from(gam, dgam)).reshape(len(points), -1).max(axis=1)
    else:
        maxima = np.empty(len(points))
        for p, pt in enumerate(points):
            try:
                maxima[p] = riemann(metric, pt, mode, h).max_abs
            except DomainError as err:
                raise GridPointError(str(err), pt) from err

    best = int(np.argmax(maxima))  # first occurrence on ties
    max_abs = float(maxima[best])
    per_point = tuple((_point(pt), float(m)) for pt, m in zip(points, maxima)) if keep_points else ()
    return FlatnessReport(
        max_abs_R=max_abs,
        argmax_point=_point(points[best]),
        passed=bool(max_abs <= tol),
        tol=float(tol),
        mode=mode.value,
        points=len(points),
        per_point=per_point,
    )


def _reciprocal_coefficient(coeff: CoefficientFunction):
    def integrand(s: float) -> float:
        v = ex.evaluate(coeff.expr, {"t": s}, coeff.bindings)
        if not v > 0:
            raise DomainError(f"coefficient {coeff.text!r} is not positive at t={s!r}")
        return 1.0 / v

    return integrand


def _check_integrable(coeff: CoefficientFunction, b: float, xi: float, value: float, tol: float, axis: int):
    # QUADPACK's extrapolation can return a finite number for a divergent
    # integral (the integral of s^-2 over [0, 1] comes back as -1). The
    # integrand is positive, so the value must carry the sign of the segment,
    # and trimming a sliver at a boundary endpoint may not increase it.
    sign = 1.0 if xi > b else -1.0
    failed = sign * value <= 0.0
    for end, other in ((b, xi), (xi, b)):
        if failed or end not in coeff.domain:
            continue
        inner = end + 1e-6 * (other - end)
        trimmed = integrate.quad(_reciprocal_coefficient(coeff), *sorted((inner, other)), epsabs=tol,
                                 epsrel=1e-13, limit=500)[0]
        failed = trimmed > abs(value) + tol
    if failed:
        raise QuadratureError(
            f"1/c on axis {axis + 1} is not integrable over [{b}, {xi}] (quadrature returned {value!r})"
        )


def isometry_map(metric: DiagonalMetric, base, x, tol: float = 1e-10) -> np.ndarray:
    """Euclidean coordinates ``phi_i(x_i) = integral_{base_i}^{x_i} ds / c_i(s)``.

    ``base`` may sit on the closed end of an axis domain (e.g. 0 for the
    conformable coefficient) as long as ``1/c_i`` is integrable there.
    """
    base = metric.check_point(base)
    x = metric.check_point(x)
    out = np.empty(metric.n)
    for i, (coeff, b, xi) in enumerate(zip(metric.coeffs, base, x)):
        lo, hi = coeff.domain
        if not (lo <= min(b, xi) and max(b, xi) <= hi):
            raise DomainError(f"segment [{b}, {xi}] on axis {i + 1} leaves the domain {coeff.domain}")
        if b == xi:
            out[i] = 0.0
            continue
        value, abserr, info = integrate.quad(
            _reciprocal_coefficient(coeff), b, xi, epsabs=tol, epsrel=1e-13, limit=500, full_output=1
        )[:3]
        if abserr > tol or not math.isfinite(value):
            raise QuadratureError(
                f"quadrature on axis {i + 1} over [{b}, {xi}] reached error {abserr:.3g} > {tol:g}"
            )
        _check_integrable(coeff, b, xi, value, tol, i)
        out[i] = value
    return out


def isometry_jacobian(metric: DiagonalMetric, x) -> np.ndarray:
    """Jacobian ``diag(1/c_i(x_i))`` of :func:`isometry_map` at ``x``."""
    c, _, _ = metric.coefficient_jets(x)
    return np.diag(1.0 / c)


def _acceleration(metric: Metric):
    if isinstance(metric, DiagonalMetric):
        def accel(x, v):
            c, c1, _ = metric.coefficient_jets(x)
            return (c1 / c) * v * v
    else:
        def accel(x, v):
            gam = christoffel_general(metric, x).values
            return -np.einsum("kij,i,j->k", gam, v, v)
    return accel


def geodesic_integrate(metric: Metric, x0, v0, T: float, steps: int) -> np.ndarray:
    """Integrate the geodesic equation with classical RK4 at fixed step ``T/steps``.

    Returns an array of shape ``(steps + 1, n)``. If the trajectory leaves the
    domain a :class:`DomainExitError` carries the path computed so far.
    """
    x = np.array(metric.check_point(x0))
    v = np.asarray(v0, dtype=float).ravel().copy()
    if v.shape != x.shape:
        raise InvalidParameterError("initial velocity must have the same dimension as the point")
    if isinstance(steps, bool) or int(steps) != steps or steps < 1:
        raise InvalidParameterError(f"steps must be a positive integer, got {steps!r}")
    steps = int(steps)
    dt = float(T) / steps
    accel = _acceleration(metric)
    path = np.empty((steps + 1, x.size))
    path[0] = x
    for s in range(steps):
        try:
            k1x, k1v = v, accel(x, v)
            k2x, k2v = v + 0.5 * dt * k1v, accel(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
            k3x, k3v = v + 0.5 * dt * k2v, accel(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
            k4x, k4v = v + dt * k3v, accel(x + dt * k3x, v + dt * k3v)
        except DomainError as err:
            raise DomainExitError(f"geodesic left the domain during step {s + 1}: {err}", path[: s + 1].copy()) from err
        x = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        path[s + 1] = x
    return path


def metric_from_spec(spec: Mapping, alpha: float | None = None) -> Metric:
    """Build a metric from its JSON description.

    Diagonal::

        {"type": "diagonal", "n": 2, "alpha": 0.5,
         "coeff": ["t^(1-a)", "t^(1-a)"], "params": {}}

    ``coeff`` may be one string shared by all axes, and may be replaced by
    ``"operator": "truncated-m:beta=2"``. ``alpha`` overrides the spec value.

    General (components are expressions in ``x1..xn``)::

        {"type": "general", "n": 2, "components": [["1", "0"], ["0", "sin(x1)^2"]]}
    """
    if not isinstance(spec, Mapping):
        raise InvalidParameterError("metric spec must be a JSON object")
    kind = spec.get("type")
    params = dict(spec.get("params") or {})
    n = spec.get("n")
    if kind == "general":
        rows = spec.get("components")
        if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
            raise InvalidParameterError("general metric needs 'components' as a list of lists")
        if n is not None and n != len(rows):
            raise InvalidParameterError(f"'n' is {n} but 'components' has {len(rows)} rows")
        return GeneralMetric.from_text(rows, params)
    if kind != "diagonal":
        raise InvalidParameterError(f"metric 'type' must be 'diagonal' or 'general', got {kind!r}")
    a = spec.get("alpha") if alpha is None else alpha
    if a is None:
        raise InvalidParameterError("diagonal metric needs 'alpha'")
    domain = tuple(spec.get("domain") or (0.0, math.inf))
    if "operator" in spec:
        if not isinstance(n, int) or isinstance(n, bool):
            raise InvalidParameterError("diagonal metric with 'operator' needs an integer 'n'")
        op = parse_operator_spec(spec["operator"], a, domain)
        return DiagonalMetric.from_operator(op, n)
    coeff = spec.get("coeff")
    if isinstance(coeff, str):
        if not isinstance(n, int) or isinstance(n, bool):
            raise InvalidParameterError("a single 'coeff' string needs an integer 'n'")
        coeff = [coeff] * n
    if not isinstance(coeff, list) or not all(isinstance(c, str) for c in coeff):
        raise InvalidParameterError("diagonal metric needs 'coeff' as a string or list of strings")
    if n is not None and n != len(coeff):
        raise InvalidParameterError(f"'n' is {n} but 'coeff' has {len(coeff)} entries")
    return DiagonalMetric(tuple(CoefficientFunction.from_text(c, a, params, domain) for c in coeff))
