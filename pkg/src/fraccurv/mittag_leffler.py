r"""Gamma, generalized Pochhammer symbol and the truncated six-parameter
Mittag-Leffler function.

The truncated series is

.. math::

    {}_i\mathbb{E}^{\rho,\delta,q}_{\gamma,\beta,p}(z)
        = \sum_{k=0}^{i} \frac{(\rho)_{qk}}{(\delta)_{pk}}
          \frac{z^k}{\Gamma(\gamma k + \beta)},
    \qquad (\rho)_{qk} = \frac{\Gamma(\rho + qk)}{\Gamma(\rho)},

restricted here to real, strictly positive parameters and real ``z``. Since the
sum is finite it is a polynomial in ``z`` and is evaluated for every real
argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from fraccurv.errors import DomainError, InvalidParameterError, MLOverflowError

__all__ = [
    "MLParams",
    "gamma_fn",
    "log_gamma",
    "pochhammer",
    "ml_term",
    "ml_truncated",
    "h_function",
]

# Gamma(x) overflows a double just above 171.62.
_GAMMA_MAX_ARG = 171.6
# Above this the direct gamma ratio is replaced by a log-gamma difference.
_DIRECT_RATIO_MAX_ARG = 150.0


@dataclass(frozen=True)
class MLParams:
    """Parameters of the truncated six-parameter Mittag-Leffler function.

    ``trunc`` is the index of the last retained term.
    """

    gamma: float
    beta: float
    rho: float
    delta: float
    p: float
    q: float
    trunc: int = 1

    def __post_init__(self):
        for name in ("gamma", "beta", "rho", "delta", "p", "q"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise InvalidParameterError(
                    f"Mittag-Leffler parameter '{name}' must be a positive finite real, got {value!r}"
                )
            object.__setattr__(self, name, float(value))
        if isinstance(self.trunc, bool) or int(self.trunc) != self.trunc or self.trunc < 0:
            raise InvalidParameterError(
                f"Mittag-Leffler truncation index must be a non-negative integer, got {self.trunc!r}"
            )
        object.__setattr__(self, "trunc", int(self.trunc))

    @classmethod
    def ones(cls, trunc: int = 1) -> "MLParams":
        """All six parameters equal to one; the series reduces to the exponential."""
        return cls(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, trunc)


def _check_positive(name: str, x: float) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise DomainError(f"{name} must be a real number, got {x!r}")
    x = float(x)
    if math.isnan(x) or x <= 0.0:
        raise DomainError(f"{name} must be positive, got {x!r}")
    if math.isinf(x):
        raise DomainError(f"{name} must be finite, got {x!r}")
    return x


def gamma_fn(x: float) -> float:
    """Gamma function on the positive reals."""
    x = _check_positive("gamma argument", x)
    if x > _GAMMA_MAX_ARG:
        raise DomainError(f"gamma({x!r}) overflows double precision")
    return math.gamma(x)


def log_gamma(x: float) -> float:
    """Natural log of the gamma function on the positive reals."""
    return math.lgamma(_check_positive("log-gamma argument", x))


def pochhammer(rho: float, q: float, k: int) -> float:
    """Generalized Pochhammer symbol ``Gamma(rho + q*k) / Gamma(rho)``."""
    rho = _check_positive("rho", rho)
    q = _check_positive("q", q)
    if isinstance(k, bool) or int(k) != k or k < 0:
        raise DomainError(f"Pochhammer index must be a non-negative integer, got {k!r}")
    k = int(k)
    if k == 0:
        return 1.0
    top = rho + q * k
    if top < _DIRECT_RATIO_MAX_ARG:
        return math.gamma(top) / math.gamma(rho)
    try:
        return math.exp(math.lgamma(top) - math.lgamma(rho))
    except OverflowError:
        raise MLOverflowError(f"pochhammer({rho}, {q}, {k}) overflows double precision") from None


def _log_coefficient(params: MLParams, k: int) -> float:
    return (
        math.lgamma(params.rho + params.q * k)
        - math.lgamma(params.rho)
        - math.lgamma(params.delta + params.p * k)
        + math.lgamma(params.delta)
        - math.lgamma(params.gamma * k + params.beta)
    )


def ml_term(params: MLParams, z: float, k: int) -> float:
    """The ``k``-th term of the series, ``(rho)_qk / (delta)_pk * z**k / Gamma(gamma*k + beta)``."""
    args = (
        params.rho + params.q * k,
        params.delta + params.p * k,
        params.gamma * k + params.beta,
    )
    if max(args) < _DIRECT_RATIO_MAX_ARG:
        coeff = pochhammer(params.rho, params.q, k) / pochhammer(params.delta, params.p, k)
        coeff /= math.gamma(params.gamma * k + params.beta)
        try:
            term = coeff * z**k
        except OverflowError:
            term = math.inf
    elif z == 0.0:
        term = 0.0
    else:
        # z**k alone may overflow while the full term does not
        log_mag = _log_coefficient(params, k) + k * math.log(abs(z))
        if log_mag > 709.78:
            term = math.inf
        else:
            term = math.exp(log_mag)
            if z < 0 and k % 2:
                term = -term
    if not math.isfinite(term):
        raise MLOverflowError(
            f"Mittag-Leffler term k={k} at z={z!r} exceeds double precision"
        )
    return term


def ml_truncated(params: MLParams, z: float) -> float:
    """Truncated six-parameter Mittag-Leffler function at real ``z``."""
    if isinstance(z, bool) or not isinstance(z, (int, float)) or not math.isfinite(z):
        raise DomainError(f"Mittag-Leffler argument must be a finite real, got {z!r}")
    z = float(z)
    total = math.fsum(ml_term(params, z, k) for k in range(params.trunc + 1))
    if not math.isfinite(total):
        raise MLOverflowError(f"Mittag-Leffler sum at z={z!r} exceeds double precision")
    return total


def h_function(params: MLParams, z: float) -> float:
    """``Gamma(beta) * ml_truncated(params, z)``; equals 1 at ``z = 0``."""
    return gamma_fn(params.beta) * ml_truncated(params, z)
