"""Compiled inner loops: field evaluation and trajectory integrators.

Every model is lowered to one representation: the nonzero entries of a
complex tensor ``T[k, n, m]`` over a product basis ``f_n(x) g_m(y)`` and one
frequency ``w[k]`` per term, so that the envelope-stripped wavefunction is

    P(x, y, t) = sum_k exp(-i w[k] t) sum_{n,m} T[k, n, m] f_n(x) g_m(y)

The model tuple ``md`` is (k, n, m, Re T, Im T, w, basis, omega_x, omega_y,
n_x, n_y) with the first five entries running over nonzero coefficients.

The real Gaussian envelope multiplying ``P`` drops out of Im(grad psi / psi)
and is applied only when psi itself is requested.

Status codes returned by the integrators: 0 ok, 1 node singularity,
2 step underflow, 3 step budget exhausted.
"""

import math

import numpy as np
from numba import njit

MONOMIAL = 0
HERMITE = 1

OK = 0
SINGULAR = 1
UNDERFLOW = 2
BUDGET = 3

_SQRT2 = math.sqrt(2.0)


@njit(cache=True, inline="always")
def _basis(u, kind, omega, n_max, f, d1):
    """Basis values and first derivatives at ``u``."""
    if kind == MONOMIAL:
        f[0] = 1.0
        d1[0] = 0.0
        for n in range(1, n_max):
            f[n] = f[n - 1] * u
            d1[n] = n * f[n - 1]
    else:
        # normalized Hermite functions with the Gaussian removed
        s = math.sqrt(omega)
        xi = s * u
        f[0] = (omega / math.pi) ** 0.25
        d1[0] = 0.0
        if n_max > 1:
            f[1] = _SQRT2 * xi * f[0]
        for n in range(1, n_max - 1):
            f[n + 1] = math.sqrt(2.0 / (n + 1)) * xi * f[n] - math.sqrt(n / (n + 1.0)) * f[n - 1]
        for n in range(1, n_max):
            d1[n] = s * math.sqrt(2.0 * n) * f[n - 1]


@njit(cache=True, inline="always")
def _second(kind, omega, n_max, f, d2):
    """Second derivatives from the values filled by :func:`_basis`."""
    d2[0] = 0.0
    for n in range(1, n_max):
        if n < 2:
            d2[n] = 0.0
        elif kind == MONOMIAL:
            d2[n] = n * (n - 1) * f[n - 2]
        else:
            d2[n] = omega * math.sqrt(4.0 * n * (n - 1)) * f[n - 2]


@njit(cache=True, inline="always")
def _prepare(x, y, t, md, W, hess):
    ek, en, em, cr, ci, w, kind, ox, oy, nx, ny = md
    _basis(x, kind, ox, nx, W[0], W[1])
    _basis(y, kind, oy, ny, W[3], W[4])
    if hess:
        _second(kind, ox, nx, W[0], W[2])
        _second(kind, oy, ny, W[3], W[5])
    for k in range(w.shape[0]):
        W[6, k] = math.cos(w[k] * t)
        W[7, k] = -math.sin(w[k] * t)


@njit(cache=True, inline="always")
def p_grad(x, y, t, md, W):
    """Return (P, dP/dx, dP/dy) for the model tuple ``md``."""
    ek, en, em, cr, ci = md[0], md[1], md[2], md[3], md[4]
    _prepare(x, y, t, md, W, False)
    pr = 0.0
    pi = 0.0
    xr = 0.0
    xi = 0.0
    yr = 0.0
    yi = 0.0
    for j in range(ek.shape[0]):
        k = ek[j]
        n = en[j]
        m = em[j]
        # coefficient times phase
        ar = cr[j] * W[6, k] - ci[j] * W[7, k]
        ai = cr[j] * W[7, k] + ci[j] * W[6, k]
        f = W[0, n] * W[3, m]
        fxd = W[1, n] * W[3, m]
        fyd = W[0, n] * W[4, m]
        pr += ar * f
        pi += ai * f
        xr += ar * fxd
        xi += ai * fxd
        yr += ar * fyd
        yi += ai * fyd
    return complex(pr, pi), complex(xr, xi), complex(yr, yi)


@njit(cache=True, inline="always")
def p_hess(x, y, t, md, W):
    """Return (P, Px, Py, Pxx, Pxy, Pyy)."""
    ek, en, em, cr, ci = md[0], md[1], md[2], md[3], md[4]
    _prepare(x, y, t, md, W, True)
    P = 0j
    Px = 0j
    Py = 0j
    Pxx = 0j
    Pxy = 0j
    Pyy = 0j
    for j in range(ek.shape[0]):
        k = ek[j]
        n = en[j]
        m = em[j]
        a = complex(cr[j], ci[j]) * complex(W[6, k], W[7, k])
        P += a * (W[0, n] * W[3, m])
        Px += a * (W[1, n] * W[3, m])
        Py += a * (W[0, n] * W[4, m])
        Pxx += a * (W[2, n] * W[3, m])
        Pxy += a * (W[1, n] * W[4, m])
        Pyy += a * (W[0, n] * W[5, m])
    return P, Px, Py, Pxx, Pxy, Pyy


def workspace(md):
    return np.empty((8, max(md[9], md[10], md[5].shape[0])))


@njit(cache=True, inline="always")
def velocity(x, y, t, md, W, thr2):
    P, Px, Py = p_grad(x, y, t, md, W)
    den = P.real * P.real + P.imag * P.imag
    if den < thr2:
        return 0.0, 0.0, False
    vx = (Px.imag * P.real - Px.real * P.imag) / den
    vy = (Py.imag * P.real - Py.real * P.imag) / den
    return vx, vy, True


@njit(cache=True, inline="always")
def velocity_jac(x, y, t, md, W, thr2):
    """Velocity and its Jacobian [[dvx/dx, dvx/dy], [dvy/dx, dvy/dy]]."""
    P, Px, Py, Pxx, Pxy, Pyy = p_hess(x, y, t, md, W)
    den = P.real * P.real + P.imag * P.imag
    if den < thr2:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, False
    inv = 1.0 / P
    gx = Px * inv
    gy = Py * inv
    jxx = (Pxx * inv - gx * gx).imag
    jxy = (Pxy * inv - gx * gy).imag
    jyy = (Pyy * inv - gy * gy).imag
    return gx.imag, gy.imag, jxx, jxy, jxy, jyy, True


@njit(cache=True)
def h3_node(t, a, b, c):
    """Closed-form nodal point of the three-term oscillator state; nan if at infinity."""
    s1c = math.sin((1.0 + c) * t)
    sct = math.sin(c * t)
    den1 = a * sct
    den2 = b * math.sqrt(c) * s1c
    if abs(den1) < 1e-12 or abs(den2) < 1e-12:
        return math.nan, math.nan
    return -s1c / den1, -a * math.sin(t) / den2


@njit(cache=True)
def _guarded_step(x, y, t, dt, guard, ga, gb, gc, radius, shrink, floor):
    """Step length after node-guard shrinking; negative means underflow."""
    if not guard:
        return dt
    xn, yn = h3_node(t, ga, gb, gc)
    if math.isnan(xn):
        return dt
    d = math.hypot(x - xn, y - yn)
    h = dt
    lim = radius
    while d < lim:
        h *= shrink
        lim *= shrink
        if h < floor * (1.0 - 1e-9):
            return -1.0
    return h


@njit(cache=True)
def rk4_path(x, y, t0, times, dt, md, thr2,
             guard, ga, gb, gc, radius, shrink, floor, freeze):
    """Fixed-step RK4 landing exactly on each entry of ``times``.

    Returns (samples[n, 2], extrema[4] = xmin, xmax, ymin, ymax, status, t_reached).
    """
    n_out = times.shape[0]
    out = np.full((n_out, 2), np.nan)
    ext = np.array([x, x, y, y])
    W = np.empty((8, max(md[9], md[10], md[5].shape[0])))
    t = t0
    for j in range(n_out):
        ts = times[j]
        sgn = 1.0 if ts >= t else -1.0
        while sgn * (ts - t) > 1e-13 * max(1.0, abs(ts)):
            h = _guarded_step(x, y, t, dt, guard, ga, gb, gc, radius, shrink, floor)
            if h < 0:
                return out, ext, UNDERFLOW, t
            land = False
            if h >= abs(ts - t):
                h = abs(ts - t)
                land = True
            h *= sgn
            tf = t0 if freeze else t
            tm = t0 if freeze else t + 0.5 * h
            te = t0 if freeze else t + h
            k1x, k1y, ok1 = velocity(x, y, tf, md, W, thr2)
            k2x, k2y, ok2 = velocity(x + 0.5 * h * k1x, y + 0.5 * h * k1y, tm, md, W, thr2)
            k3x, k3y, ok3 = velocity(x + 0.5 * h * k2x, y + 0.5 * h * k2y, tm, md, W, thr2)
            k4x, k4y, ok4 = velocity(x + h * k3x, y + h * k3y, te, md, W, thr2)
            if not (ok1 and ok2 and ok3 and ok4):
                return out, ext, SINGULAR, t
            x += h * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
            y += h * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
            t = ts if land else t + h
            if x < ext[0]:
                ext[0] = x
            if x > ext[1]:
                ext[1] = x
            if y < ext[2]:
                ext[2] = y
            if y > ext[3]:
                ext[3] = y
        out[j, 0] = x
        out[j, 1] = y
    return out, ext, OK, t


# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9
_A21 = 1.0 / 5
_A31, _A32 = 3.0 / 40, 9.0 / 40
_A41, _A42, _A43 = 44.0 / 45, -56.0 / 15, 32.0 / 9
_A51, _A52, _A53, _A54 = 19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729
_A61, _A62, _A63, _A64, _A65 = 9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600, -71.0 / 16695, 71.0 / 1920,
                                -17253.0 / 339200, 22.0 / 525, -1.0 / 40)


@njit(cache=True)
def dp45_path(x, y, t0, times, h0, rtol, atol, hmin, max_steps,
              md, thr2):
    """Adaptive Dormand-Prince integration landing on each entry of ``times``.

    Returns (samples[n, 2], status, t_reached, n_steps).
    """
    n_out = times.shape[0]
    out = np.full((n_out, 2), np.nan)
    W = np.empty((8, max(md[9], md[10], md[5].shape[0])))
    t = t0
    h_prop = abs(h0)
    steps = 0
    for j in range(n_out):
        ts = times[j]
        sgn = 1.0 if ts >= t else -1.0
        while sgn * (ts - t) > 1e-13 * max(1.0, abs(ts)):
            if steps >= max_steps:
                return out, BUDGET, t, steps
            h = h_prop
            land = False
            if h >= abs(ts - t):
                h = abs(ts - t)
                land = True
            hs = sgn * h
            k1x, k1y, ok = velocity(x, y, t, md, W, thr2)
            if not ok:
                return out, SINGULAR, t, steps
            good = True
            k2x, k2y, ok = velocity(x + hs * _A21 * k1x, y + hs * _A21 * k1y,
                                    t + _C2 * hs, md, W, thr2)
            good = good and ok
            k3x, k3y, ok = velocity(x + hs * (_A31 * k1x + _A32 * k2x),
                                    y + hs * (_A31 * k1y + _A32 * k2y),
                                    t + _C3 * hs, md, W, thr2)
            good = good and ok
            k4x, k4y, ok = velocity(x + hs * (_A41 * k1x + _A42 * k2x + _A43 * k3x),
                                    y + hs * (_A41 * k1y + _A42 * k2y + _A43 * k3y),
                                    t + _C4 * hs, md, W, thr2)
            good = good and ok
            k5x, k5y, ok = velocity(x + hs * (_A51 * k1x + _A52 * k2x + _A53 * k3x + _A54 * k4x),
                                    y + hs * (_A51 * k1y + _A52 * k2y + _A53 * k3y + _A54 * k4y),
                                    t + _C5 * hs, md, W, thr2)
            good = good and ok
            k6x, k6y, ok = velocity(x + hs * (_A61 * k1x + _A62 * k2x + _A63 * k3x + _A64 * k4x + _A65 * k5x),
                                    y + hs * (_A61 * k1y + _A62 * k2y + _A63 * k3y + _A64 * k4y + _A65 * k5y),
                                    t + hs, md, W, thr2)
            good = good and ok
            xn = x + hs * (_B1 * k1x + _B3 * k3x + _B4 * k4x + _B5 * k5x + _B6 * k6x)
            yn = y + hs * (_B1 * k1y + _B3 * k3y + _B4 * k4y + _B5 * k5y + _B6 * k6y)
            k7x, k7y, ok = velocity(xn, yn, t + hs, md, W, thr2)
            good = good and ok
            steps += 1
            if not good:
                h_prop = 0.25 * h
                if h_prop < hmin:
                    return out, UNDERFLOW, t, steps
                continue
            ex = hs * (_E1 * k1x + _E3 * k3x + _E4 * k4x + _E5 * k5x + _E6 * k6x + _E7 * k7x)
            ey = hs * (_E1 * k1y + _E3 * k3y + _E4 * k4y + _E5 * k5y + _E6 * k6y + _E7 * k7y)
            sx = atol + rtol * max(abs(x), abs(xn))
            sy = atol + rtol * max(abs(y), abs(yn))
            err = max(abs(ex) / sx, abs(ey) / sy)
            if err <= 1.0:
                x = xn
                y = yn
                t = ts if land else t + hs
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                if not land or fac < 1.0:
                    h_prop = h * fac
            else:
                h_prop = h * max(0.2, 0.9 * err ** -0.2)
                if h_prop < hmin:
                    return out, UNDERFLOW, t, steps
        out[j, 0] = x
        out[j, 1] = y
    return out, OK, t, steps


@njit(cache=True)
def ensemble_dp45(xs, ys, t0, times, h0, rtol, atol, hmin, max_steps,
                  md, thr2):
    n = xs.shape[0]
    res = np.full((times.shape[0], n, 2), np.nan)
    status = np.zeros(n, dtype=np.int64)
    for i in range(n):
        out, st, _, _ = dp45_path(xs[i], ys[i], t0, times, h0, rtol, atol, hmin,
                                  max_steps, md, thr2)
        res[:, i, :] = out
        status[i] = st
    return res, status


@njit(cache=True)
def ensemble_rk4(xs, ys, t0, times, dt, md, thr2,
                 guard, ga, gb, gc, radius, shrink, floor):
    n = xs.shape[0]
    res = np.full((times.shape[0], n, 2), np.nan)
    status = np.zeros(n, dtype=np.int64)
    for i in range(n):
        out, _, st, _ = rk4_path(xs[i], ys[i], t0, times, dt, md, thr2,
                                 guard, ga, gb, gc, radius, shrink, floor, False)
        res[:, i, :] = out
        status[i] = st
    return res, status


@njit(cache=True)
def _var_rhs(x, y, ux, uy, t, md, W, thr2):
    vx, vy, jxx, jxy, jyx, jyy, ok = velocity_jac(x, y, t, md, W, thr2)
    return vx, vy, jxx * ux + jxy * uy, jyx * ux + jyy * uy, ok


@njit(cache=True)
def rk4_variational(x, y, ux, uy, t0, times, dt, md, thr2,
                    guard, ga, gb, gc, radius, shrink, floor, freeze, renorm_every):
    """RK4 on the trajectory plus its tangent flow.

    Returns (samples[n, 3] = x, y, ln|xi(t)/xi(0)|, status, t_reached).
    """
    n_out = times.shape[0]
    out = np.full((n_out, 3), np.nan)
    W = np.empty((8, max(md[9], md[10], md[5].shape[0])))
    nrm = math.hypot(ux, uy)
    ux /= nrm
    uy /= nrm
    logacc = 0.0
    t = t0
    count = 0
    for j in range(n_out):
        ts = times[j]
        sgn = 1.0 if ts >= t else -1.0
        while sgn * (ts - t) > 1e-13 * max(1.0, abs(ts)):
            h = _guarded_step(x, y, t, dt, guard, ga, gb, gc, radius, shrink, floor)
            if h < 0:
                return out, UNDERFLOW, t
            land = False
            if h >= abs(ts - t):
                h = abs(ts - t)
                land = True
            h *= sgn
            tf = t0 if freeze else t
            tm = t0 if freeze else t + 0.5 * h
            te = t0 if freeze else t + h
            a1, b1, c1, d1, ok1 = _var_rhs(x, y, ux, uy, tf, md, W, thr2)
            a2, b2, c2, d2, ok2 = _var_rhs(x + 0.5 * h * a1, y + 0.5 * h * b1,
                                           ux + 0.5 * h * c1, uy + 0.5 * h * d1,
                                           tm, md, W, thr2)
            a3, b3, c3, d3, ok3 = _var_rhs(x + 0.5 * h * a2, y + 0.5 * h * b2,
                                           ux + 0.5 * h * c2, uy + 0.5 * h * d2,
                                           tm, md, W, thr2)
            a4, b4, c4, d4, ok4 = _var_rhs(x + h * a3, y + h * b3, ux + h * c3, uy + h * d3,
                                           te, md, W, thr2)
            if not (ok1 and ok2 and ok3 and ok4):
                return out, SINGULAR, t
            x += h * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0
            y += h * (b1 + 2.0 * b2 + 2.0 * b3 + b4) / 6.0
            ux += h * (c1 + 2.0 * c2 + 2.0 * c3 + c4) / 6.0
            uy += h * (d1 + 2.0 * d2 + 2.0 * d3 + d4) / 6.0
            t = ts if land else t + h
            count += 1
            if count >= renorm_every:
                nrm = math.hypot(ux, uy)
                logacc += math.log(nrm)
                ux /= nrm
                uy /= nrm
                count = 0
        out[j, 0] = x
        out[j, 1] = y
        out[j, 2] = logacc + math.log(math.hypot(ux, uy))
    return out, OK, t
