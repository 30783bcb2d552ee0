import math

import numpy as np
import pytest

from bohmorder.errors import ConfigError
from bohmorder.models import harmonic3
from bohmorder.series import (encounter_predictor, first_order_solution, inner_series_b0,
                              outer_series, series_defect, series_extrema)
from bohmorder.trajectory import IntegratorConfig, integrate

C = math.sqrt(2.0) / 2.0


def test_first_order_closed_form():
    a, b, x0, y0 = 0.3, 0.4, 1.2, -0.7
    sol = first_order_solution(a, b, C, x0, y0)
    t = np.linspace(0, 20, 201)
    s = math.sqrt(C)
    x_ref = x0 + a * (np.cos(t) - 1) + b * s * y0 * (np.cos((1 + C) * t) - 1) / (1 + C)
    y_ref = y0 + b * s * x0 * (np.cos((1 + C) * t) - 1) / (1 + C)
    assert np.allclose(sol.x(t), x_ref, atol=1e-14)
    assert np.allclose(sol.y(t), y_ref, atol=1e-14)


@pytest.mark.parametrize("N", [1, 2, 3, 4, 5])
def test_inner_series_defect_scales_with_order(N):
    # halving a must shrink the residual by 2^(N+1)
    d1 = series_defect(inner_series_b0(0.02, 0.3, N)[0])
    d2 = series_defect(inner_series_b0(0.01, 0.3, N)[0])
    assert math.log2(d1 / d2) == pytest.approx(N + 1, abs=0.15)


def test_first_order_defect_is_second_order():
    d1 = series_defect(first_order_solution(0.02, 0.02, C, 1.0, 0.5))
    d2 = series_defect(first_order_solution(0.01, 0.01, C, 1.0, 0.5))
    assert math.log2(d1 / d2) == pytest.approx(2, abs=0.15)


def test_inner_series_tracks_integration():
    sol, verdict = inner_series_b0(0.2, 0.0, 12)
    assert verdict.convergent
    rec = integrate(harmonic3(0.2, 0.0, C), 0.0, 0.0, IntegratorConfig(dt=1e-3, t_end=2 * math.pi))
    assert np.max(np.abs(sol.x(rec.t) - rec.x)) < 1e-6


def test_inner_series_rejects_bad_order():
    with pytest.raises(ConfigError):
        inner_series_b0(0.5, 0.0, 0)


def test_outer_series_defect_drops_with_order_and_distance():
    d = [series_defect(outer_series(1, 1, C, 3.4, 3.4, n)) for n in (2, 4, 8)]
    assert d[0] > d[1] > d[2]
    far = series_defect(outer_series(1, 1, C, 6.8, 6.8, 8))
    assert far < d[2] / 100


def test_outer_series_has_no_secular_growth():
    sol = outer_series(1, 1, C, 3.4, 3.4, 10)
    assert max(sol.secular_weights()) < 1e-12


def test_outer_series_argument_checks():
    with pytest.raises(ConfigError):
        outer_series(1, 0, C, 3.4, 3.4, 4)
    with pytest.raises(ConfigError):
        outer_series(1, 1, C, 3.4, 3.4, 0)


def test_series_dump_format():
    sol = first_order_solution(0.5, 0.5, C, 1.0, 1.0)
    lines = list(sol.dump_lines("y"))
    assert lines[0] == "order,power_t,kind,n1,n2,n3,coeff"
    rows = [ln.split(",") for ln in lines[1:]]
    assert all(len(r) == 7 for r in rows)
    assert {r[0] for r in rows} == {"0", "1"}


def test_series_extrema_of_first_order():
    sol = first_order_solution(0.5, 0.0, C, 1.0, 1.0)
    xmin, xmax, ymin, ymax = series_extrema(sol, t_span=20.0, scan_step=1e-3)
    assert xmin == pytest.approx(0.0, abs=1e-9)
    assert xmax == pytest.approx(1.0, abs=1e-12)
    assert ymin == ymax == 1.0


@pytest.mark.parametrize("x0,expected", [(-1.0, "chaotic"), (1.0, "ordered")])
def test_encounter_predictor_side(x0, expected):
    pred = encounter_predictor(1.0, 1.0, C, x0, 0.3)
    assert pred.applicability == "valid"
    assert pred.prediction == expected
    assert pred.node_at_max == (-1.0, 0.3)
    # maxima of x sit near whole periods and the exact node is near (-1/a, y0)
    for t, (xn, yn) in zip(pred.t_max_list, pred.nodes_exact):
        k = round(t / (2 * math.pi))
        assert abs(t - 2 * math.pi * k) < 0.5
        assert abs(xn + 1.0) < 1.0


def test_encounter_predictor_applicability_levels():
    assert encounter_predictor(1.0, 1.0, C, 0.5, 0.8).applicability == "marginal"
    assert encounter_predictor(1.0, 1.0, C, 0.5, 2.0).prediction == "inconclusive"
    assert encounter_predictor(0.0, 1.0, C, 0.5, 0.2).prediction == "inconclusive"


def _first_order_error(a):
    sol = first_order_solution(a, a, C, 1.0, 1.0)
    rec = integrate(harmonic3(a, a, C), 1.0, 1.0, IntegratorConfig(dt=1e-3, t_end=50.0, sample_dt=0.05))
    return max(np.max(np.abs(sol.x(rec.t) - rec.x)), np.max(np.abs(sol.y(rec.t) - rec.y)))


def test_first_order_error_is_quadratic_in_amplitude():
    e2, e1 = _first_order_error(0.2), _first_order_error(0.1)
    assert e2 == pytest.approx(0.0934, abs=1e-3)
    assert math.log2(e2 / e1) == pytest.approx(2.0, abs=0.2)


def test_encounter_ratio_at_unit_amplitudes():
    pred = encounter_predictor(1.0, 1.0, C, 1.0, 1.0)
    assert pred.q == pytest.approx(2 ** -0.25, abs=1e-12)
    assert pred.applicability == "marginal"
