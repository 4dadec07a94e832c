"""Local fractional derivatives and the curvature of the associated alpha-metric."""

from fraccurv.errors import (
    DomainError,
    FracCurvError,
    InvalidParameterError,
    NonConvergenceError,
    ParseError,
)
from fraccurv.expr import eval_jet2, parse, to_text
from fraccurv.fracderiv import (
    CoefficientFunction,
    LocalFractionalOperator,
    OperatorKind,
    ScalarFunction,
    apply,
    apply_limit_def,
    make_operator,
    value_at_zero,
    v_coefficient,
)
from fraccurv.geometry import (
    DiagonalMetric,
    GeneralMetric,
    Mode,
    christoffel_diagonal,
    christoffel_general,
    flatness_scan,
    geodesic_integrate,
    isometry_map,
    metric_at,
    riemann,
)
from fraccurv.jets import Jet2
from fraccurv.mittag_leffler import MLParams, gamma_fn, h_function, ml_truncated, pochhammer

__version__ = "0.1.0"
