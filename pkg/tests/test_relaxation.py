import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bohmorder.errors import ConfigError, EmptyRegion
from bohmorder.models import density, eval_field, make_model
from bohmorder.relaxation import (DensityGrid, density_difference, fill_grid, grid_box, h_function,
                                  hull_area, mirror_model, noise_level, psi_density, relaxation_run,
                                  restricted_difference, sample_born, smoothed_density)
from bohmorder.trajectory import IntegratorConfig


def test_grid_box_is_exact_lattice():
    e = grid_box((1.0, 1.0), 0.2)
    assert e.count == 961
    xs = np.unique(e.particles[:, 0])
    assert xs.size == 31 and xs[0] == pytest.approx(0.9) and xs[-1] == pytest.approx(1.1)
    assert np.allclose(np.diff(xs), 0.2 / 30)


def test_density_grid_coordinates():
    g = DensityGrid()
    c = g.coords
    assert c.size == 128 and c[0] == pytest.approx(-12.6) and c[-1] == pytest.approx(12.8)


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=30),
       st.floats(0.1, 1.0))
@settings(max_examples=40, deadline=None)
def test_smoothed_density_is_normalized(pts, sigma):
    g = DensityGrid()
    P = smoothed_density(np.array(pts), g, sigma)
    assert abs(P.sum() * g.cell_area - 1.0) < 1e-6
    assert P.min() >= 0


def test_smoothed_density_ignores_failed_particles():
    g = DensityGrid()
    a = smoothed_density(np.array([[0.0, 0.0], [1.0, 1.0]]), g)
    b = smoothed_density(np.array([[0.0, 0.0], [np.nan, np.nan], [1.0, 1.0]]), g)
    assert np.array_equal(a, b)


def test_sigma_must_be_positive():
    with pytest.raises(ConfigError):
        smoothed_density(np.zeros((1, 2)), DensityGrid(), 0.0)


def test_born_samples_follow_density(h3):
    ens = sample_born(h3, 0.0, 4000, seed=3)
    # compare quadrant masses with a fine-grid integral of |psi|^2
    u = np.linspace(-8, 8, 801)
    X, Y = np.meshgrid(u, u, indexing="ij")
    rho = density(h3, X, Y, 0.0)
    rho /= rho.sum()
    for sx in (1, -1):
        for sy in (1, -1):
            want = rho[(sx * X > 0) & (sy * Y > 0)].sum()
            got = np.mean((sx * ens.particles[:, 0] > 0) & (sy * ens.particles[:, 1] > 0))
            assert got == pytest.approx(want, abs=4 * math.sqrt(want * (1 - want) / 4000))


def test_born_sampling_is_seeded(h3):
    a = sample_born(h3, 0.0, 50, seed=9)
    b = sample_born(h3, 0.0, 50, seed=9)
    assert np.array_equal(a.particles, b.particles)
    with pytest.raises(ConfigError):
        sample_born(h3, 0.0, 0)


def test_metrics_vanish_for_identical_densities(h3):
    g = fill_grid(h3, np.zeros((1, 2)), 0.0)
    g.P_s = g.psi2.copy()
    assert density_difference(g) == 0.0
    assert h_function(g) == pytest.approx(0.0, abs=1e-12)


def test_h_function_is_nonnegative(h3):
    g = fill_grid(h3, grid_box((1.0, 1.0), 0.2).particles, 0.0)
    # Gibbs inequality on the lattice (both densities carry unit grid mass)
    assert h_function(g) * g.cell_area > 0


def test_psi_density_normalized(wp):
    g = DensityGrid()
    assert psi_density(wp, 1.3, g).sum() * g.cell_area == pytest.approx(1.0, abs=1e-12)


def test_restricted_difference(h3):
    g = fill_grid(h3, grid_box((1.4, 1.4), 0.2).particles, 0.0)
    d = restricted_difference(g, "x>0")
    assert 0 < d < density_difference(g) / g.cell_area
    far = fill_grid(h3, grid_box((8.0, 0.0), 0.2).particles, 0.0)
    with pytest.raises(EmptyRegion):
        restricted_difference(far, "x<0")
    with pytest.raises(ConfigError):
        restricted_difference(g, "y>0")


def test_mirror_model_reflects_x():
    m = make_model("harmonic3")
    r = mirror_model(m)
    for x, y, t in ((0.4, 0.7, 1.1), (-1.2, 0.3, 4.0)):
        v = eval_field(m, x, y, t).velocity
        w = eval_field(r, -x, y, t).velocity
        assert w[0] == pytest.approx(-v[0], abs=1e-12)
        assert w[1] == pytest.approx(v[1], abs=1e-12)


def test_hull_area_of_square():
    e = grid_box((0.0, 0.0), 2.0, 5)
    assert hull_area(e.particles) == pytest.approx(4.0)


def test_relaxation_run_short(h3):
    ens = grid_box((1.0, 1.0), 0.2, 7)
    cfg = IntegratorConfig(dt=1e-2, method="rk45", rtol=1e-8, atol=1e-10, t_end=3.0)
    run = relaxation_run(h3, ens, cfg, [0.0, 1.0, 2.0, 3.0], halfplane="x>0")
    assert run.snapshots.shape == (4, 49, 2)
    assert np.array_equal(run.snapshots[0], ens.particles)
    assert np.all(run.D > 0) and np.all(np.isfinite(run.H))
    assert run.D_bar.shape == (4,)
    rows = list(run.rows())
    assert len(rows) == 4 and len(rows[0]) == 4


def test_relaxation_rejects_unsorted_times(h3):
    with pytest.raises(ConfigError):
        relaxation_run(h3, grid_box((1, 1), 0.2, 3), sample_times=[0.0, 2.0, 1.0])


def test_born_ensemble_stays_in_equilibrium_briefly(h3):
    ens = sample_born(h3, 0.0, 961, seed=1)
    run = relaxation_run(h3, ens, IntegratorConfig(dt=1e-2, method="rk45", rtol=1e-8, atol=1e-10,
                                                   t_end=5.0), [0.0, 5.0])
    noise = noise_level(h3, [0.0, 5.0], seed=100)
    assert run.D.max() < 2 * noise.max()


def test_born_initial_difference_across_seeds(h3):
    D0 = np.array([density_difference(fill_grid(h3, sample_born(h3, 0.0, 961, s).particles, 0.0))
                   for s in range(20)])
    assert 3.0 <= D0.mean() <= 6.0
    assert D0.min() >= 2.0 and D0.max() <= 8.0


def test_entropy_tracks_density_difference(h3):
    cfg = IntegratorConfig(dt=1e-2, method="rk45", rtol=1e-8, atol=1e-10, t_end=40.0)
    run = relaxation_run(h3, grid_box((1.4, 1.4), 0.2, 21), cfg, np.arange(0.0, 40.1, 1.0))
    assert np.corrcoef(run.D, run.H)[0, 1] > 0.5
