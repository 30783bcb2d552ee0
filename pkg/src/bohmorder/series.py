"""Perturbation series for trajectories of the three-state oscillator model.

Three expansions are provided:

* the first-order solution in the amplitudes ``a``, ``b``;
* the ``b = 0`` series in powers of ``a`` together with a convergence verdict;
* the large-distance series in ``1/x0`` and ``1/y0`` for ``x = x0 X``,
  ``y = y0 Y`` with ``X(0) = Y(0) = 1``.

Series are built order by order.  Every intermediate quantity (inverse powers
of ``X`` and ``Y``, the expanded denominator, ...) is itself kept as a list of
coefficients that is extended by one order per step, so no product is ever
recomputed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import ConfigError
from . import _kernels as K
from .models import harmonic3, harmonic3_velocity
from .trigpoly import TrigPoly

log = logging.getLogger(__name__)

AMPLITUDE = "amplitude"
INVERSE = "inverse-coordinate"


@dataclass
class SeriesSolution:
    """Truncated series ``x(t) = sx * sum_j X_j(t)``, ``y(t) = sy * sum_j Y_j(t)``.

    ``x_orders[0]`` and ``y_orders[0]`` are the constant leading terms; every
    higher order vanishes at t = 0.
    """

    x_orders: list[TrigPoly]
    y_orders: list[TrigPoly]
    small_parameter: str
    order: int
    scale: tuple[float, float] = (1.0, 1.0)
    params: dict = field(default_factory=dict)

    def x(self, t, upto: int | None = None):
        return self.scale[0] * _sum_eval(self.x_orders, t, upto)

    def y(self, t, upto: int | None = None):
        return self.scale[1] * _sum_eval(self.y_orders, t, upto)

    def dx(self, t):
        return self.scale[0] * _sum_eval([p.derivative() for p in self.x_orders], t, None)

    def dy(self, t):
        return self.scale[1] * _sum_eval([p.derivative() for p in self.y_orders], t, None)

    def secular_weights(self) -> list[float]:
        """Total |coefficient| carried by t^p (p > 0) terms at each order."""
        return [px.secular_weight() + py.secular_weight()
                for px, py in zip(self.x_orders, self.y_orders)]

    def dump_lines(self, which: str = "x") -> Iterable[str]:
        """Lines ``order,power_t,kind,n1,n2,n3,coeff`` for the x or y orders."""
        orders = self.x_orders if which == "x" else self.y_orders
        yield "order,power_t,kind,n1,n2,n3,coeff"
        for j, poly in enumerate(orders):
            for p, kind, n1, n2, coeff in poly.real_terms():
                yield f"{j},{p},{kind},{n1},{n2},0,{coeff!r}"


def _sum_eval(orders, t, upto):
    sel = orders if upto is None else orders[: upto + 1]
    total = sel[0]
    for p in sel[1:]:
        total = total + p
    return total(t)


def _cauchy(A: list[TrigPoly], B: list[TrigPoly], j: int, start: int = 0) -> TrigPoly:
    """Coefficient j of the product of two coefficient lists."""
    acc = None
    for i in range(start, j + 1):
        if i >= len(A) or j - i >= len(B):
            continue
        a, b = A[i], B[j - i]
        if a.coeffs.any() and b.coeffs.any():
            acc = a * b if acc is None else acc + a * b
    return acc if acc is not None else TrigPoly.zero(A[0].c)


def _at(A: list[TrigPoly], j: int, c: float) -> TrigPoly:
    return A[j] if 0 <= j < len(A) else TrigPoly.zero(c)


def _reciprocal_step(S: list[TrigPoly], inv: list[TrigPoly], j: int) -> TrigPoly:
    """Coefficient j of 1/S given S[0] = 1: inv_j = -sum_{i>=1} S_i inv_{j-i}."""
    return -_cauchy(S, inv, j, start=1)


# first order ----------------------------------------------------------------------

def first_order_solution(a: float, b: float, c: float, x0: float, y0: float) -> SeriesSolution:
    """Solution to first order in the amplitudes a and b."""
    sc = math.sqrt(c)
    T = TrigPoly
    x1 = (T.cos(1, 0, c, a) - a) + (T.cos(1, 1, c) - 1.0) * (b * sc * y0 / (1 + c))
    y1 = (T.cos(1, 1, c) - 1.0) * (b * sc * x0 / (1 + c))
    return SeriesSolution([T.const(x0, c), x1.trimmed()], [T.const(y0, c), y1.trimmed()],
                          AMPLITUDE, 1, params=dict(a=a, b=b, c=c, x0=x0, y0=y0))


# b = 0 series ---------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceVerdict:
    convergent: bool
    max_abs_ax: float
    band: float


def inner_series_b0(a: float, x0: float, N: int, c: float = math.sqrt(2.0) / 2.0,
                    resolution: int = 4001) -> tuple[SeriesSolution, ConvergenceVerdict]:
    """Series in ``a`` for dx/dt = -a sin t / (1 + a^2 x^2 + 2 a x cos t).

    The verdict is divergent when the truncated ``x(t)`` reaches the band
    ``|a x| = 1`` anywhere in one period; that band is where the expansion of
    the denominator stops converging.
    """
    if N < 1:
        raise ConfigError("N must be >= 1")
    T = TrigPoly
    cos_t = T.cos(1, 0, c)
    msin_t = T.sin(1, 0, c, -a)
    xs = [T.const(x0, c)]
    x2 = [xs[0] * xs[0]]
    g = [T.zero(c)]          # denominator minus one
    Q = [T.const(1.0, c)]    # 1 / denominator
    for j in range(1, N + 1):
        dx = msin_t * Q[j - 1]
        xs.append(dx.integrate())
        x2.append(_cauchy(xs, xs, j))
        g.append(_at(x2, j - 2, c) * a**2 + cos_t * _at(xs, j - 1, c) * (2 * a))
        Q.append(_reciprocal_step([T.const(1.0, c)] + g[1:], Q, j))
    sol = SeriesSolution(xs, [T.const(0.0, c)] * (N + 1), AMPLITUDE, N,
                         params=dict(a=a, b=0.0, c=c, x0=x0))
    t = np.linspace(0.0, 2 * math.pi, resolution, endpoint=False)
    peak = float(np.max(np.abs(a * sol.x(t)))) if a != 0 else 0.0
    return sol, ConvergenceVerdict(peak < 1.0, peak, 1.0 / abs(a) if a else math.inf)


# large-distance series ---------------------------------------------------------------

def outer_series(a: float, b: float, c: float, x0: float, y0: float, N: int = 15) -> SeriesSolution:
    """Series in inverse powers of (x0, y0); order j collects terms x0^-k y0^-l with k + l = j.

    Writing x = x0 X, y = y0 Y and A = b sqrt(c), the equations of motion become

        X' = -[a u^3 v^2 sin t X^-2 Y^-2 / A^2 + u^3 v sin((1+c)t) X^-2 Y^-1 / A] / (1 + R)
        Y' = -[a v^3 sin(ct) Y^-2 / A + u v^3 sin((1+c)t) X^-1 Y^-2 / A] / (1 + R)

    with u = 1/x0, v = 1/y0 and R collecting the lower-order parts of the
    denominator.  Each order is obtained by integrating the right-hand side
    coefficient of that order.
    """
    if N < 1:
        raise ConfigError("N must be >= 1")
    if x0 == 0 or y0 == 0 or b == 0 or c <= 0:
        raise ConfigError("outer series needs nonzero x0, y0, b and c > 0")
    if abs(x0) < 2 or abs(y0) < 2:
        log.warning("outer series at |x0|,|y0| < 2 is unlikely to be useful")
    T = TrigPoly
    A = b * math.sqrt(c)
    u, v = 1.0 / x0, 1.0 / y0
    one = T.const(1.0, c)
    zero = T.zero(c)
    cos_c, cos_1c, cos_1 = T.cos(0, 1, c), T.cos(1, 1, c), T.cos(1, 0, c)
    sin_1, sin_1c, sin_c = T.sin(1, 0, c), T.sin(1, 1, c), T.sin(0, 1, c)

    X, Y = [one], [one]
    Xi, Yi = [one], [one]                # X^-1, Y^-1
    X2, Y2 = [one], [one]                # X^-2, Y^-2
    XY, XY2, X2Y, X2Y2 = [one], [one], [one], [one]
    R, Q = [zero], [one]
    FX, FY = [zero], [zero]

    def shifted(S, j, k):
        return _at(S, j - k, c)

    for j in range(1, N + 1):
        fx = sin_1 * shifted(X2Y2, j, 5) * (a * u**3 * v**2 / A**2) \
            + sin_1c * shifted(X2Y, j, 4) * (u**3 * v / A)
        fy = sin_c * shifted(Y2, j, 3) * (a * v**3 / A) \
            + sin_1c * shifted(XY2, j, 4) * (u * v**3 / A)
        FX.append(fx)
        FY.append(fy)
        X.append((-_cauchy(FX, Q, j)).integrate())
        Y.append((-_cauchy(FY, Q, j)).integrate())
        Xi.append(_reciprocal_step(X, Xi, j))
        Yi.append(_reciprocal_step(Y, Yi, j))
        X2.append(_cauchy(Xi, Xi, j))
        Y2.append(_cauchy(Yi, Yi, j))
        XY.append(_cauchy(Xi, Yi, j))
        XY2.append(_cauchy(Xi, Y2, j))
        X2Y.append(_cauchy(X2, Yi, j))
        X2Y2.append(_cauchy(X2, Y2, j))
        R.append(cos_c * shifted(Yi, j, 1) * (2 * a * v / A)
                 + shifted(Y2, j, 2) * (a**2 * v**2 / A**2)
                 + cos_1c * shifted(XY, j, 2) * (2 * u * v / A)
                 + cos_1 * shifted(XY2, j, 3) * (2 * a * u * v**2 / A**2)
                 + shifted(X2Y2, j, 4) * (u**2 * v**2 / A**2))
        Q.append(_reciprocal_step([one] + R[1:], Q, j))
    return SeriesSolution(X, Y, INVERSE, N, scale=(x0, y0),
                          params=dict(a=a, b=b, c=c, x0=x0, y0=y0))


# evaluation helpers ---------------------------------------------------------------------

def _refine(t: np.ndarray, f: np.ndarray, k: int) -> float:
    """Quadratic interpolation of the extremum at sample k."""
    if k == 0 or k == len(f) - 1:
        return float(f[k])
    y0, y1, y2 = f[k - 1], f[k], f[k + 1]
    den = y0 - 2 * y1 + y2
    if den == 0:
        return float(y1)
    s = 0.5 * (y0 - y2) / den
    return float(y1 - 0.25 * (y0 - y2) * s)


def extrema_of(f: Callable[[np.ndarray], np.ndarray], t_span: float, scan_step: float,
               chunk: int = 50000) -> tuple[float, float]:
    """Min and max of f over [0, t_span] on a uniform scan with quadratic refinement."""
    n = int(round(t_span / scan_step)) + 1
    lo, hi = math.inf, -math.inf
    for s in range(0, n, chunk):
        # overlap one sample on each side so an extremum at a chunk edge
        # is interior to its neighbour
        i0, i1 = max(s - 1, 0), min(s + chunk + 1, n)
        t = np.arange(i0, i1) * scan_step
        v = np.asarray(f(t))
        lo = min(lo, _refine(t, v, int(np.argmin(v))))
        hi = max(hi, _refine(t, v, int(np.argmax(v))))
    return float(lo), float(hi)


def series_extrema(sol: SeriesSolution, t_span: float = 1e3,
                   scan_step: float = 1e-3) -> tuple[float, float, float, float]:
    """(x_min, x_max, y_min, y_max) of the evaluated series over [0, t_span]."""
    xmin, xmax = extrema_of(sol.x, t_span, scan_step)
    ymin, ymax = extrema_of(sol.y, t_span, scan_step)
    return xmin, xmax, ymin, ymax


def series_defect(sol: SeriesSolution, t: np.ndarray | None = None) -> float:
    """Max over t of the residual |d(series)/dt - v(series)| in the oscillator model."""
    p = sol.params
    if t is None:
        t = np.linspace(0.0, 2 * math.pi, 2001)
    x, y = sol.x(t), sol.y(t)
    vx, vy = harmonic3_velocity(x, y, t, p["a"], p.get("b", 0.0), p["c"])
    return float(max(np.max(np.abs(sol.dx(t) - vx)), np.max(np.abs(sol.dy(t) - vy))))


# nodal encounter predictor ------------------------------------------------------------------

VALID = "valid"
MARGINAL = "marginal"


@dataclass(frozen=True)
class EncounterPrediction:
    prediction: str                     # ordered | chaotic | inconclusive
    q: float
    applicability: str                  # valid | marginal | inconclusive
    t_max_list: tuple[float, ...]
    node_at_max: tuple[float, float]    # first-order estimate (-1/a, y0)
    nodes_exact: tuple[tuple[float, float], ...]


def encounter_predictor(a: float, b: float, c: float, x0: float, y0: float,
                        n_max: int = 10, q_valid: float = 0.5, q_limit: float = 1.0) -> EncounterPrediction:
    """Predict order or chaos from where the nodal point sits when x is maximal.

    To first order in (a, b), x reaches its maxima at roots of
    ``a sin t + b sqrt(c) y0 sin((1+c)t) = 0`` with
    ``a cos t + b sqrt(c) y0 (1+c) cos((1+c)t) > 0``.  For small
    ``q = b sqrt(c) y0 / a`` these lie near t = 2 pi k and the nodal point is
    then close to (-1/a, y0).  A moving point on the same side in x as that
    node is predicted chaotic, otherwise ordered.

    Applicability is ``valid`` for |q| <= q_valid, ``marginal`` up to q_limit,
    and ``inconclusive`` beyond it or when |x0 y0| >= 1/(b sqrt(c)).
    """
    if a == 0:
        return EncounterPrediction("inconclusive", math.inf, "inconclusive", (), (math.nan, math.nan), ())
    sc = math.sqrt(c)
    q = b * sc * y0 / a
    if abs(q) <= q_valid:
        level = VALID
    elif abs(q) < q_limit:
        level = MARGINAL
    else:
        level = "inconclusive"
    if b != 0 and abs(x0 * y0) >= 1.0 / (b * sc):
        level = "inconclusive"
    node = (-1.0 / a, y0)
    if level == "inconclusive":
        return EncounterPrediction("inconclusive", q, level, (), node, ())

    def f(t):
        return a * math.sin(t) + b * sc * y0 * math.sin((1 + c) * t)

    def fp(t):
        return a * math.cos(t) + b * sc * y0 * (1 + c) * math.cos((1 + c) * t)

    times, nodes = [], []
    for k in range(1, n_max + 1):
        t = 2 * math.pi * k + math.asin(max(-1.0, min(1.0, -q * math.sin(2 * math.pi * c * k))))
        for _ in range(50):
            step = f(t) / fp(t)
            t -= step
            if abs(step) < 1e-14:
                break
        if fp(t) > 0 and abs(t - 2 * math.pi * k) < math.pi / 2:
            times.append(t)
            nodes.append(tuple(float(v) for v in K.h3_node(t, a, b, c)))
    same_side = np.sign(x0) == np.sign(node[0])
    return EncounterPrediction("chaotic" if same_side else "ordered", q, level,
                               tuple(times), node, tuple(nodes))


def numeric_extrema(a: float, b: float, c: float, x0: float, y0: float, t_span: float = 1e3,
                    dt: float = 1e-3) -> tuple[float, float, float, float]:
    """Extrema of the integrated trajectory, comparable with :func:`series_extrema`."""
    from .trajectory import IntegratorConfig, integrate

    rec = integrate(harmonic3(a, b, c), x0, y0, IntegratorConfig(dt=dt, t_end=t_span, sample_dt=dt))
    return rec.extrema
