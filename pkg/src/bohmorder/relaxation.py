"""Particle ensembles, smoothed densities and quantum-relaxation metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .errors import ConfigError, EmptyRegion, EnvelopeViolation, StepUnderflow
from .models import WavefunctionModel, density
from .trajectory import IntegratorConfig, evolve_ensemble

log = logging.getLogger(__name__)

H_FLOOR = 1e-30


@dataclass
class Ensemble:
    particles: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.particles.shape[0]


def grid_box(center: tuple[float, float], side: float, n_side: int = 31) -> Ensemble:
    """Uniform ``n_side x n_side`` lattice filling a square box, edges included."""
    cx, cy = center
    u = np.linspace(-side / 2, side / 2, n_side)
    X, Y = np.meshgrid(cx + u, cy + u, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return Ensemble(pts, {"kind": "grid_box", "center": (cx, cy), "side": side, "n_side": n_side})


def sample_born(model: WavefunctionModel, t0: float = 0.0, n: int = 961, seed: int = 0,
                proposal_window: tuple[float, float, float, float] = (-8.0, 8.0, -8.0, 8.0),
                envelope_resolution: int = 401, batch: int = 4096) -> Ensemble:
    """Rejection-sample ``n`` points from |psi(., ., t0)|^2 on the proposal window.

    Uniform proposals are accepted with probability |psi|^2 / envelope, where
    the envelope is 1.05 times the maximum of |psi|^2 on a fine grid.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    x0, x1, y0, y1 = proposal_window
    gx = np.linspace(x0, x1, envelope_resolution)
    gy = np.linspace(y0, y1, envelope_resolution)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    env = 1.05 * density(model, X, Y, t0).max()
    rng = np.random.default_rng(seed)
    out = np.empty((0, 2))
    while out.shape[0] < n:
        px = rng.uniform(x0, x1, batch)
        py = rng.uniform(y0, y1, batch)
        u = rng.uniform(0.0, env, batch)
        rho = density(model, px, py, t0)
        if np.any(rho > env):
            raise EnvelopeViolation(f"|psi|^2 = {rho.max():.4g} exceeds envelope {env:.4g}")
        out = np.vstack([out, np.column_stack([px, py])[u < rho]])
    return Ensemble(out[:n].copy(), {"kind": "born", "t0": t0, "seed": seed})


@dataclass
class DensityGrid:
    """Regular lattice x_k = -0.1 N + 0.2 k, k = 1..N, identical in y."""

    N: int = 128
    spacing: float = 0.2
    P_s: np.ndarray | None = None
    psi2: np.ndarray | None = None

    @property
    def coords(self) -> np.ndarray:
        return -self.N * self.spacing / 2 + self.spacing * np.arange(1, self.N + 1)

    @property
    def cell_area(self) -> float:
        return self.spacing**2


def smoothed_density(positions: np.ndarray, grid: DensityGrid, sigma: float = 0.3) -> np.ndarray:
    """Gaussian-kernel particle density on the grid, normalized to unit grid integral."""
    if not sigma > 0:
        raise ConfigError("sigma must be positive")
    pos = np.asarray(positions, dtype=float)
    pos = pos[np.isfinite(pos).all(axis=1)]
    c = grid.coords
    gx = np.exp(-((c[None, :] - pos[:, :1]) ** 2) / (2 * sigma**2))
    gy = np.exp(-((c[None, :] - pos[:, 1:2]) ** 2) / (2 * sigma**2))
    P = gx.T @ gy
    total = P.sum() * grid.cell_area
    return P / total if total > 0 else P


def psi_density(model: WavefunctionModel, t: float, grid: DensityGrid) -> np.ndarray:
    """|psi|^2 on the grid, renormalized to unit grid integral."""
    X, Y = np.meshgrid(grid.coords, grid.coords, indexing="ij")
    rho = density(model, X, Y, t)
    return rho / (rho.sum() * grid.cell_area)


def fill_grid(model: WavefunctionModel, positions: np.ndarray, t: float,
              grid: DensityGrid | None = None, sigma: float = 0.3) -> DensityGrid:
    g = DensityGrid() if grid is None else DensityGrid(grid.N, grid.spacing)
    g.P_s = smoothed_density(positions, g, sigma)
    g.psi2 = psi_density(model, t, g)
    return g


def density_difference(grid: DensityGrid) -> float:
    """Raw lattice sum of |P_s - |psi|^2| (no cell-area weight)."""
    return float(np.abs(grid.P_s - grid.psi2).sum())


def h_function(grid: DensityGrid) -> float:
    """Coarse-grained H_s = sum P_s log(P_s/|psi|^2).

    Cells where either density is at or below 1e-30 are skipped; exact nodal
    points of psi can fall on lattice sites.
    """
    P, R = grid.P_s, grid.psi2
    m = (P > H_FLOOR) & (R > H_FLOOR)
    return float(np.sum(P[m] * np.log(P[m] / R[m])))


def restricted_difference(grid: DensityGrid, halfplane: str = "x>0") -> float:
    """D computed on one half-plane after renormalizing both densities there."""
    c = grid.coords
    if halfplane == "x>0":
        sel = c > 0
    elif halfplane == "x<0":
        sel = c < 0
    else:
        raise ConfigError("halfplane must be 'x>0' or 'x<0'")
    P = grid.P_s[sel]
    R = grid.psi2[sel]
    mp = P.sum() * grid.cell_area
    mr = R.sum() * grid.cell_area
    if mp <= 1e-12 or mr <= 0:
        raise EmptyRegion(f"no particle density on half-plane {halfplane}")
    return float(np.abs(P / mp - R / mr).sum())


@dataclass
class RelaxationSeries:
    t: np.ndarray
    D: np.ndarray
    H: np.ndarray
    D_bar: np.ndarray | None
    n_failed: int
    snapshots: np.ndarray = field(repr=False, default=None)  # (n_times, n, 2)

    def rows(self):
        for k in range(len(self.t)):
            row = [self.t[k], self.D[k], self.H[k]]
            if self.D_bar is not None:
                row.append(self.D_bar[k])
            yield row


ENSEMBLE_CFG = IntegratorConfig(dt=1e-2, method="rk45", rtol=1e-8, atol=1e-10)


def default_sample_times(t_end: float) -> np.ndarray:
    """Every time unit up to 1000, every 10 units beyond."""
    a = np.arange(0.0, min(t_end, 1000.0) + 1e-9, 1.0)
    if t_end > 1000.0:
        a = np.concatenate([a, np.arange(1010.0, t_end + 1e-9, 10.0)])
    return a


def relaxation_run(model: WavefunctionModel, ensemble: Ensemble, cfg: IntegratorConfig = ENSEMBLE_CFG,
                   sample_times: Sequence[float] | None = None, halfplane: str | None = None,
                   sigma: float = 0.3, grid: DensityGrid | None = None, workers: int | None = None,
                   max_fail_fraction: float = 0.01, t0: float = 0.0) -> RelaxationSeries:
    """Evolve the ensemble and compute D, H_s (and optionally D_bar) at each sample time.

    Particles whose integration fails are dropped from the densities; the run
    aborts when more than ``max_fail_fraction`` of them fail.
    """
    ts = default_sample_times(cfg.t_end) if sample_times is None else np.asarray(sample_times, float)
    if ts.size > 1 and np.any(np.diff(ts) <= 0):
        raise ConfigError("sample_times must be increasing")
    grid = DensityGrid() if grid is None else grid
    later = ts[ts > t0]
    if later.size:
        pos, status = evolve_ensemble(model, ensemble.particles, t0, later, cfg, workers)
    else:
        pos, status = np.empty((0, ensemble.count, 2)), np.zeros(ensemble.count, dtype=int)
    n_failed = int(np.count_nonzero(status != K.OK))
    if n_failed:
        log.warning("%d of %d particles failed and are excluded", n_failed, ensemble.count)
        if n_failed > max_fail_fraction * ensemble.count:
            raise StepUnderflow(f"{n_failed} of {ensemble.count} particles failed")
    good = status == K.OK
    snaps = np.empty((ts.size, int(good.sum()), 2))
    n_before = ts.size - later.size
    snaps[:n_before] = ensemble.particles[good]
    snaps[n_before:] = pos[:, good]
    D = np.empty(ts.size)
    H = np.empty(ts.size)
    Db = np.empty(ts.size) if halfplane else None
    for k, t in enumerate(ts):
        g = fill_grid(model, snaps[k], float(t), grid, sigma)
        D[k] = density_difference(g)
        H[k] = h_function(g)
        if halfplane:
            Db[k] = restricted_difference(g, halfplane)
    return RelaxationSeries(ts, D, H, Db, n_failed, snaps)


def noise_level(model: WavefunctionModel, times: Sequence[float], n: int = 961, seed: int = 0,
                sigma: float = 0.3, proposal_window=(-8.0, 8.0, -8.0, 8.0)) -> np.ndarray:
    """D of fresh Born-rule samples drawn directly at each of ``times``.

    Equivariance makes this the statistical floor that an evolved
    equilibrium ensemble would show.
    """
    out = []
    for k, t in enumerate(times):
        ens = sample_born(model, float(t), n, seed + k, proposal_window)
        out.append(density_difference(fill_grid(model, ens.particles, float(t), sigma=sigma)))
    return np.array(out)


def evolved_noise_level(model: WavefunctionModel, t_end: float = 1000.0, n: int = 961, seed: int = 0,
                        cfg: IntegratorConfig = ENSEMBLE_CFG, sample_dt: float = 10.0,
                        sigma: float = 0.3) -> float:
    """Time average of D for a Born-sampled ensemble evolved over ``[0, t_end]``.

    Unlike :func:`noise_level` this keeps one particle set, so it also absorbs
    whatever residual structure the dynamics leaves at a finite sample size.
    """
    ens = sample_born(model, 0.0, n, seed)
    ts = np.arange(0.0, t_end + 1e-9, sample_dt)
    run = relaxation_run(model, ens, cfg, ts, sigma=sigma)
    return float(run.D.mean())


def hull_area(points: np.ndarray) -> float:
    from scipy.spatial import ConvexHull

    pts = np.asarray(points, float)
    pts = pts[np.isfinite(pts).all(axis=1)]
    return float(ConvexHull(pts).volume)


def mirror_model(model: WavefunctionModel) -> WavefunctionModel:
    """Model reflected by x -> -x (flips the sign of odd-in-x basis coefficients)."""
    from dataclasses import replace

    if model.basis != K.MONOMIAL and model.basis != K.HERMITE:
        raise ConfigError("unsupported basis")
    terms = []
    for term in model.terms:
        M = term.matrix().copy()
        M[1::2, :] *= -1
        terms.append(replace(term, spatial_id=term.spatial_id + "~", coeffs=M))
    return replace(model, terms=tuple(terms))
