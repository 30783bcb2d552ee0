"""Integration of guidance trajectories, tangent flows and derived diagnostics."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernels as K
from .errors import (BudgetExceeded, ConfigError, NodeAtInfinity, NodeSingularity,
                     StepUnderflow, ZeroDeviation)
from .models import WavefunctionModel, nodal_point

WORKERS_ENV = "BOHMORDER_WORKERS"


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-4
    t_end: float = 100.0
    method: str = "rk4"  # "rk4" fixed step or "rk45" adaptive Dormand-Prince
    node_guard_radius: float = 1.0
    node_guard_shrink: float = 0.1
    step_floor: float = 1e-8
    sample_dt: float = 0.01
    t0: float = 0.0
    rtol: float = 1e-10
    atol: float = 1e-12
    max_steps: int = 2_000_000_000

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not 0 < self.node_guard_shrink < 1:
            raise ConfigError("node_guard_shrink must lie in (0, 1)")
        if self.method not in ("rk4", "rk45"):
            raise ConfigError(f"unknown method {self.method!r}")
        if not self.sample_dt > 0:
            raise ConfigError("sample_dt must be positive")

    def sample_times(self) -> np.ndarray:
        span = self.t_end - self.t0
        n = int(math.floor(abs(span) / self.sample_dt + 1e-9))
        ts = self.t0 + math.copysign(self.sample_dt, span) * np.arange(1, n + 1)
        if n == 0 or abs(ts[-1] - self.t_end) > 1e-12 * max(1.0, abs(self.t_end)):
            ts = np.append(ts, self.t_end)
        return ts[ts != self.t0] if span != 0 else np.empty(0)


@dataclass
class TrajectoryRecord:
    """Samples ``(t, x, y)`` in integration order plus an optional tangent log.

    ``xi_log`` rows are ``(t, ln|xi(t)/xi(0)|)``.
    """

    samples: np.ndarray
    xi_log: np.ndarray | None = None
    extrema: tuple[float, float, float, float] | None = None  # xmin, xmax, ymin, ymax

    @property
    def t(self):
        return self.samples[:, 0]

    @property
    def x(self):
        return self.samples[:, 1]

    @property
    def y(self):
        return self.samples[:, 2]

    def chi(self) -> tuple[np.ndarray, np.ndarray]:
        """Finite-time Lyapunov number chi(t) = ln|xi(t)/xi(0)| / t for t > 0."""
        if self.xi_log is None:
            raise ConfigError("record has no tangent data")
        t, lg = self.xi_log[:, 0], self.xi_log[:, 1]
        keep = t > 0
        return t[keep], lg[keep] / t[keep]


def _guard_args(model: WavefunctionModel, cfg: IntegratorConfig):
    p = model.params
    on = model.kind == "harmonic3" and p.a != 0 and p.b != 0
    return on, p.a, p.b, p.c, cfg.node_guard_radius, cfg.node_guard_shrink, cfg.step_floor


def _raise_status(status: int, t: float, what: str = "trajectory"):
    if status == K.SINGULAR:
        raise NodeSingularity(f"{what} reached a node at t={t:.6g}")
    if status == K.UNDERFLOW:
        raise StepUnderflow(f"{what} needs a step below the floor near t={t:.6g}")
    if status == K.BUDGET:
        raise BudgetExceeded(f"{what} exhausted its step budget at t={t:.6g}")


def integrate(model: WavefunctionModel, x0: float, y0: float, cfg: IntegratorConfig,
              times: Sequence[float] | None = None) -> TrajectoryRecord:
    """Integrate dr/dt = Im(grad psi/psi) from (x0, y0) at ``cfg.t0``."""
    ts = cfg.sample_times() if times is None else np.asarray(times, dtype=float)
    if cfg.method == "rk4":
        out, ext, status, t_reached = K.rk4_path(
            float(x0), float(y0), cfg.t0, ts, cfg.dt, model.md, model.thr2,
            *_guard_args(model, cfg), False)
        extrema = tuple(float(v) for v in ext)
    else:
        out, status, t_reached, _ = K.dp45_path(
            float(x0), float(y0), cfg.t0, ts, cfg.dt, cfg.rtol, cfg.atol, 1e-14, cfg.max_steps,
            model.md, model.thr2)
        extrema = None
    _raise_status(status, t_reached)
    samples = np.column_stack([np.concatenate([[cfg.t0], ts]),
                               np.concatenate([[[x0, y0]], out])])
    if extrema is None:
        extrema = (samples[:, 1].min(), samples[:, 1].max(), samples[:, 2].min(), samples[:, 2].max())
    return TrajectoryRecord(samples, extrema=extrema)


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _ensemble_chunk(args):
    model, xs, ys, t0, times, cfg = args
    if cfg.method == "rk45":
        return K.ensemble_dp45(xs, ys, t0, times, cfg.dt, cfg.rtol, cfg.atol, 1e-14, cfg.max_steps,
                               model.md, model.thr2)
    return K.ensemble_rk4(xs, ys, t0, times, cfg.dt, model.md, model.thr2,
                          *_guard_args(model, cfg))


def evolve_ensemble(model: WavefunctionModel, positions: np.ndarray, t0: float,
                    times: Sequence[float], cfg: IntegratorConfig,
                    workers: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Advance every particle from ``t0`` through ``times``.

    Returns positions of shape ``(len(times), n, 2)`` (nan after a failure) and
    per-particle kernel status codes.  Particles are independent, so the result
    does not depend on ``workers``.
    """
    pos = np.ascontiguousarray(positions, dtype=float)
    ts = np.ascontiguousarray(times, dtype=float)
    workers = _default_workers() if workers is None else workers
    n = pos.shape[0]
    if workers <= 1 or n < 2:
        return _ensemble_chunk((model, pos[:, 0].copy(), pos[:, 1].copy(), t0, ts, cfg))
    bounds = np.linspace(0, n, min(workers, n) + 1).astype(int)
    jobs = [(model, pos[lo:hi, 0].copy(), pos[lo:hi, 1].copy(), t0, ts, cfg)
            for lo, hi in zip(bounds[:-1], bounds[1:])]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(_ensemble_chunk, jobs))
    return (np.concatenate([p[0] for p in parts], axis=1),
            np.concatenate([p[1] for p in parts]))


# Lyapunov numbers ---------------------------------------------------------

def log_times(t_end: float, t_first: float = 1.0, per_decade: int = 100) -> np.ndarray:
    n = int(math.ceil(per_decade * math.log10(t_end / t_first))) + 1
    return np.unique(np.concatenate([np.geomspace(t_first, t_end, n), [t_end]]))


def lyapunov(model: WavefunctionModel, x0: float, y0: float, cfg: IntegratorConfig,
             deviation: tuple[float, float] = (1.0, 0.0), times: Sequence[float] | None = None,
             renorm_every: int = 1000, freeze_time: bool = False) -> TrajectoryRecord:
    """Trajectory plus the tangent-vector log needed for chi(t).

    The deviation vector follows the analytic Jacobian of the velocity field
    and is renormalized every ``renorm_every`` steps with its logarithm
    accumulated.  ``freeze_time`` holds the field at ``cfg.t0``.
    """
    if math.hypot(*deviation) == 0:
        raise ZeroDeviation("initial deviation vector is zero")
    if cfg.method != "rk4":
        raise ConfigError("tangent integration supports only the fixed-step rk4 method")
    ts = log_times(cfg.t_end) if times is None else np.asarray(times, dtype=float)
    out, status, t_reached = K.rk4_variational(
        float(x0), float(y0), float(deviation[0]), float(deviation[1]), cfg.t0, ts, cfg.dt,
        model.md, model.thr2, *_guard_args(model, cfg), freeze_time, renorm_every)
    _raise_status(status, t_reached)
    samples = np.column_stack([np.concatenate([[cfg.t0], ts]),
                               np.concatenate([[[x0, y0]], out[:, :2]])])
    xi = np.column_stack([np.concatenate([[cfg.t0], ts]), np.concatenate([[0.0], out[:, 2]])])
    return TrajectoryRecord(samples, xi_log=xi)


def chi_loglog_slope(record: TrajectoryRecord, t_lo: float, t_hi: float, bins_per_decade: int = 10) -> float:
    """Slope of log chi against log t over [t_lo, t_hi].

    chi of an ordered orbit oscillates around a 1/t law, so the fit uses the
    running envelope: the maximum of chi*t per logarithmic bin, divided by the
    bin's time.
    """
    t, chi = record.chi()
    sel = (t >= t_lo) & (t <= t_hi)
    t, lg = t[sel], (chi * t)[sel]
    edges = np.geomspace(t_lo, t_hi, int(round(bins_per_decade * math.log10(t_hi / t_lo))) + 1)
    bt, bv = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = (t >= lo) & (t <= hi)
        if m.any():
            k = np.argmax(lg[m])
            if lg[m][k] > 0:
                bt.append(t[m][k])
                bv.append(lg[m][k] / t[m][k])
    if len(bt) < 3:
        return math.nan
    return float(np.polyfit(np.log(bt), np.log(bv), 1)[0])


def classify_chi(record: TrajectoryRecord, decades: float = 2.0) -> str:
    """'ordered' for a -1 +/- 0.1 log-log slope over the last ``decades``,
    'chaotic' when chi varies by under 20% over the last decade."""
    t, chi = record.chi()
    t_end = t[-1]
    slope = chi_loglog_slope(record, t_end / 10**decades, t_end)
    if abs(slope + 1.0) <= 0.1:
        return "ordered"
    last = chi[t >= t_end / 10]
    if last.size and last.min() > 0 and (last.max() - last.min()) / last.mean() < 0.2:
        return "chaotic"
    return "undetermined"


# nodal encounters -----------------------------------------------------

def node_distance_events(model: WavefunctionModel, record: TrajectoryRecord) -> np.ndarray:
    """Rows ``(t, u, v)`` with u = x - x_N, v = y - y_N at strict local minima of d_N."""
    if model.kind != "harmonic3":
        raise ConfigError("node events need the harmonic3 closed-form node")
    p = model.params
    if p.a == 0 or p.b == 0:
        return np.empty((0, 3))
    n = len(record.t)
    uv = np.full((n, 2), np.nan)
    for i, (t, x, y) in enumerate(record.samples):
        try:
            xn, yn = nodal_point(model, t)
        except NodeAtInfinity:
            continue
        uv[i] = x - xn, y - yn
    d = np.hypot(uv[:, 0], uv[:, 1])
    prev, cur, nxt = d[:-2], d[1:-1], d[2:]
    with np.errstate(invalid="ignore"):
        mins = np.nonzero((cur < prev) & (cur < nxt))[0] + 1
    return np.column_stack([record.t[mins], uv[mins]]) if mins.size else np.empty((0, 3))


# stroboscopic sections --------------------------------------------------

SECTION_CFG = IntegratorConfig(dt=1e-2, method="rk45", rtol=1e-11, atol=1e-13)


def stroboscopic_section(model: WavefunctionModel, initial_conditions: np.ndarray, n_periods: int,
                         cfg: IntegratorConfig = SECTION_CFG, workers: int | None = None) -> np.ndarray:
    """Iterates at t = 2*pi*k, k = 0..n_periods; shape ``(n_traj, n_periods + 1, 2)``.

    Failed trajectories are nan from the failure onwards.
    """
    if model.kind != "wispuj":
        raise ConfigError("stroboscopic sections need the 2*pi periodic wispuj model")
    ics = np.atleast_2d(np.asarray(initial_conditions, dtype=float))
    times = 2.0 * math.pi * np.arange(1, n_periods + 1)
    pos, _ = evolve_ensemble(model, ics, 0.0, times, cfg, workers)
    out = np.empty((ics.shape[0], n_periods + 1, 2))
    out[:, 0] = ics
    out[:, 1:] = np.transpose(pos, (1, 0, 2))
    return out


def section_map_jacobian(model: WavefunctionModel, x: float, y: float, h: float = 1e-5,
                         cfg: IntegratorConfig = SECTION_CFG) -> np.ndarray:
    """Central finite-difference Jacobian of the one-period section map."""
    pts = np.array([[x + h, y], [x - h, y], [x, y + h], [x, y - h]])
    img = stroboscopic_section(model, pts, 1, cfg, workers=1)[:, 1]
    return np.column_stack([(img[0] - img[1]) / (2 * h), (img[2] - img[3]) / (2 * h)])


# recurrences -----------------------------------------------------------

def continued_fraction(r: float, max_terms: int = 20, tol: float = 1e-12) -> list[int]:
    """Partial quotients [a1, a2, ...] of r in (0, 1) written as 1/(a1 + 1/(a2 + ...))."""
    if not 0 < r < 1:
        raise ConfigError("ratio must lie in (0, 1)")
    frac = Fraction(r).limit_denominator(10**15) if isinstance(r, float) else Fraction(r)
    out = []
    x = 1 / frac
    for _ in range(max_terms):
        a = math.floor(x)
        out.append(int(a))
        rem = x - a
        if rem == 0 or abs(float(rem)) < tol:
            break
        x = 1 / rem
    return out


def convergents(quotients: Sequence[int]) -> list[tuple[int, int]]:
    """(q_n, p_n) with q_n/p_n the successive truncates of 1/(a1 + 1/(a2 + ...))."""
    res = []
    # numerator/denominator recurrences of [0; a1, a2, ...]
    q_prev, q = 1, 0
    p_prev, p = 0, 1
    for a in quotients:
        q_prev, q = q, a * q + q_prev
        p_prev, p = p, a * p + p_prev
        res.append((q, p))
    return res


@dataclass
class RecurrenceAnalysis:
    convergents: list[tuple[int, int]]
    periods: np.ndarray
    distances: np.ndarray
    gamma: float
    bound_constant: float
    positions: np.ndarray = field(repr=False, default=None)

    def bound(self) -> np.ndarray:
        pq = np.array([p + q for q, p in self.convergents], dtype=float)
        return self.bound_constant * 2 * math.pi / pq


def recurrence_analysis(model: WavefunctionModel, positions: np.ndarray, max_order: int,
                        cfg: IntegratorConfig = IntegratorConfig(method="rk45", rtol=1e-10, atol=1e-12),
                        budget: float = 2e4, workers: int | None = None) -> RecurrenceAnalysis:
    """Return distances of the ensemble at the approximate periods T_n = 2 pi p_n / omega1."""
    w1, w2 = model.frequencies
    ratio = w2 / w1
    if ratio >= 1:
        w1, w2 = w2, w1
        ratio = w2 / w1
    conv = convergents(continued_fraction(ratio, max_order))[:max_order]
    periods = np.array([2 * math.pi * p / w1 for _, p in conv])
    if periods.max() > budget:
        raise BudgetExceeded(f"period {periods.max():.4g} exceeds budget {budget:.4g}")
    pos0 = np.asarray(positions, dtype=float)
    pos, status = evolve_ensemble(model, pos0, 0.0, periods, cfg, workers)
    ok = status == K.OK
    dist = np.array([np.max(np.hypot(*(pos[k, ok] - pos0[ok]).T)) for k in range(len(periods))])
    pq = np.array([p + q for q, p in conv], dtype=float)
    gamma = float(np.median([abs(q * w1 - p * w2) * (q + p) for q, p in conv]))
    const = float(np.max(dist * pq / (2 * math.pi)))
    return RecurrenceAnalysis(conv, periods, dist, gamma, const, pos)
