"""Wavefunction models built as closed-form superpositions of oscillator eigenstates.

Each model is a list of :class:`EigenTerm` objects sharing one real Gaussian
envelope ``exp(-(ax x**2 + ay y**2)/2)``.  Guidance velocities, nodal points
and densities are all computed from this representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels as K
from .errors import ConfigError, NodeAtInfinity, NodeSingularity

SINGULAR_THRESHOLD = 1e-12

KINDS = ("harmonic3", "harmonic4quartic", "harmonic5", "wispuj", "henonheiles3")

# spatial factors as monomial coefficient matrices M[n, m] for x**n y**m
SPATIAL_FACTORS = {
    "1": np.array([[1.0]]),
    "x": np.array([[0.0], [1.0]]),
    "y": np.array([[0.0, 1.0]]),
    "xy": np.array([[0.0, 0.0], [0.0, 1.0]]),
    "x2m1": np.array([[-1.0], [0.0], [1.0]]),
}


@dataclass(frozen=True)
class EigenTerm:
    """One eigenstate in a superposition.

    ``spatial_id`` names a registered monomial factor; Hénon-Heiles states
    carry their own Hermite-basis ``coeffs`` instead.
    """

    amplitude: complex
    phase_frequency: float
    spatial_id: str
    coeffs: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not math.isfinite(self.phase_frequency):
            raise ConfigError("phase_frequency must be finite")
        if self.coeffs is None and self.spatial_id not in SPATIAL_FACTORS:
            raise ConfigError(f"unknown spatial factor {self.spatial_id!r}")

    def matrix(self) -> np.ndarray:
        return SPATIAL_FACTORS[self.spatial_id] if self.coeffs is None else self.coeffs


@dataclass(frozen=True)
class ModelParams:
    a: float = 0.0
    b: float = 0.0
    c: float = math.sqrt(2.0) / 2.0
    d: float = 0.0
    epsilon: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0


@dataclass(frozen=True)
class FieldSample:
    psi: complex
    grad_psi: tuple[complex, complex]
    velocity: tuple[float, float]


@dataclass(frozen=True, eq=False)
class WavefunctionModel:
    kind: str
    terms: tuple[EigenTerm, ...]
    params: ModelParams
    basis: int = K.MONOMIAL
    envelope: tuple[float, float] = (1.0, 1.0)
    singular_threshold: float = SINGULAR_THRESHOLD

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if not self.params.c > 0:
            raise ConfigError("frequency ratio c must be positive")
        if self.kind == "harmonic3" and len(self.terms) != 3:
            raise ConfigError("harmonic3 needs exactly three terms")
        if self.kind == "wispuj" and self.params.c != 1.0:
            raise ConfigError("wispuj requires c = 1")
        T, w = self._lower()
        object.__setattr__(self, "_T", T)
        object.__setattr__(self, "_w", w)
        k, n, m = np.nonzero(T)
        # a common phase cancels in every velocity, so the kernels drop it
        md = (k.astype(np.int64), n.astype(np.int64), m.astype(np.int64),
              T[k, n, m].real.copy(), T[k, n, m].imag.copy(), w - w[0], int(self.basis),
              float(self.envelope[0]), float(self.envelope[1]), int(T.shape[1]), int(T.shape[2]))
        object.__setattr__(self, "_md", md)

    def _lower(self):
        n = max(t.matrix().shape[0] for t in self.terms)
        m = max(t.matrix().shape[1] for t in self.terms)
        T = np.zeros((len(self.terms), n, m), dtype=complex)
        for k, term in enumerate(self.terms):
            M = term.matrix()
            T[k, : M.shape[0], : M.shape[1]] = term.amplitude * M
        w = np.array([t.phase_frequency for t in self.terms], dtype=float)
        return T, w

    @property
    def kernel_args(self):
        """(T, w, basis, omega_x, omega_y): the dense coefficient tensor and frequencies."""
        return self._T, self._w, self.basis, self.envelope[0], self.envelope[1]

    @property
    def md(self):
        """Sparse model tuple consumed by the compiled kernels."""
        return self._md

    @property
    def thr2(self) -> float:
        return self.singular_threshold**2

    def scaled(self, z: complex) -> "WavefunctionModel":
        terms = tuple(replace(t, amplitude=t.amplitude * z) for t in self.terms)
        return replace(self, terms=terms)

    @property
    def frequencies(self) -> tuple[float, float]:
        """Basic angular frequencies (omega1, omega2) of the two oscillator modes."""
        return 1.0, self.params.c


def _oscillator_ground(c: float) -> float:
    """Ground-state energy (1 + c)/2, after checking that c is a valid frequency ratio."""
    if not c > 0:
        raise ConfigError("frequency ratio c must be positive")
    return (1.0 + c) / 2.0


def harmonic3(a: float = 1.0, b: float = 1.0, c: float = math.sqrt(2.0) / 2.0) -> WavefunctionModel:
    """Ground state plus the (1,0) and (1,1) states of the anisotropic oscillator."""
    e0 = _oscillator_ground(c)
    terms = (
        EigenTerm(1.0, e0, "1"),
        EigenTerm(a, e0 + 1.0, "x"),
        EigenTerm(b * math.sqrt(c), e0 + 1.0 + c, "xy"),
    )
    return WavefunctionModel("harmonic3", terms, ModelParams(a=a, b=b, c=c), envelope=(1.0, c))


def harmonic4quartic(a: float = 1.23, b: float = 1.15, c: float = math.sqrt(2.0) / 2.0) -> WavefunctionModel:
    """Three-term model ``1 + a(x^2-1)e^{-2it} + b c^{1/2} xy e^{-i(1+c)t}`` times the ground state.

    The quadratic factor is kept as ``x^2 - 1`` rather than the second
    Hermite polynomial, so |psi|^2 is not carried along exactly by the flow.
    """
    e0 = _oscillator_ground(c)
    terms = (
        EigenTerm(1.0, e0, "1"),
        EigenTerm(a, e0 + 2.0, "x2m1"),
        EigenTerm(b * math.sqrt(c), e0 + 1.0 + c, "xy"),
    )
    return WavefunctionModel("harmonic4quartic", terms, ModelParams(a=a, b=b, c=c), envelope=(1.0, c))


def harmonic5(a: float = 1.0, b: float = 1.0, d: float = 1.0,
              c: float = math.sqrt(2.0) / 2.0) -> WavefunctionModel:
    """Four-term superposition adding ``d x e^{-it}`` to the quartic model."""
    e0 = _oscillator_ground(c)
    terms = (
        EigenTerm(1.0, e0, "1"),
        EigenTerm(a, e0 + 2.0, "x2m1"),
        EigenTerm(b * math.sqrt(c), e0 + 1.0 + c, "xy"),
        EigenTerm(d, e0 + 1.0, "x"),
    )
    return WavefunctionModel("harmonic5", terms, ModelParams(a=a, b=b, c=c, d=d), envelope=(1.0, c))


WISPUJ_DEFAULTS = dict(a=0.17651, b=1.0, d=1.0, gamma1=3.876968, gamma2=2.684916)


def wispuj(a: float = 0.17651, b: float = 1.0, d: float = 1.0,
           gamma1: float = 3.876968, gamma2: float = 2.684916) -> WavefunctionModel:
    """Isotropic three-state model with complex amplitudes ``b e^{-i gamma1}``, ``d e^{-i gamma2}``.

    The whole guidance flow is 2*pi periodic.
    """
    terms = (
        EigenTerm(a, 1.0, "1"),
        EigenTerm(b * np.exp(-1j * gamma1), 2.0, "x"),
        EigenTerm(d * np.exp(-1j * gamma2), 2.0, "y"),
    )
    params = ModelParams(a=a, b=b, c=1.0, d=d, gamma1=gamma1, gamma2=gamma2)
    return WavefunctionModel("wispuj", terms, params, envelope=(1.0, 1.0))


def make_model(kind: str, **kw) -> WavefunctionModel:
    """Build a model by kind name from keyword parameters (unused keys ignored)."""
    p = {k: v for k, v in kw.items() if v is not None}
    if kind == "harmonic3":
        return harmonic3(p.get("a", 1.0), p.get("b", 1.0), p.get("c", math.sqrt(2) / 2))
    if kind == "harmonic4quartic":
        return harmonic4quartic(p.get("a", 1.23), p.get("b", 1.15), p.get("c", math.sqrt(2) / 2))
    if kind == "harmonic5":
        return harmonic5(p.get("a", 1.0), p.get("b", 1.0), p.get("d", 1.0), p.get("c", math.sqrt(2) / 2))
    if kind == "wispuj":
        if p.get("c", 1.0) != 1.0:
            raise ConfigError("wispuj requires c = 1")
        return wispuj(*(p.get(k, WISPUJ_DEFAULTS[k]) for k in ("a", "b", "d", "gamma1", "gamma2")))
    if kind == "henonheiles3":
        from .hh_spectrum import HH_EPSILON, build_spectrum, hh_wavefunction

        spec = build_spectrum(1.0, p.get("c", math.sqrt(2) / 2), p.get("epsilon", HH_EPSILON),
                              int(p.get("K", 200)))
        return hh_wavefunction(spec, p.get("a", 1.0), p.get("b", 1.0))
    raise ConfigError(f"unknown model kind {kind!r}")


# model file grammar -------------------------------------------------------

_FILE_KEYS = ("kind", "a", "b", "c", "d", "epsilon", "gamma1", "gamma2", "K")


def parse_model_text(text: str) -> WavefunctionModel:
    """Parse ``key=value`` lines; ``#`` starts a comment, blank lines are skipped."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _FILE_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key == "kind":
            values[key] = val
        else:
            try:
                values[key] = _parse_number(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: bad number {val!r}") from None
    if "kind" not in values:
        raise ConfigError("model file lacks 'kind'")
    kind = values.pop("kind")
    return make_model(str(kind), **values)


def _parse_number(val: str) -> float:
    v = val.replace(" ", "")
    if v.startswith("sqrt(") and v.endswith(")"):
        return math.sqrt(float(v[5:-1]))
    if v.startswith("sqrt(") and ")/" in v:
        inner, den = v[5:].split(")/")
        return math.sqrt(float(inner)) / float(den)
    return float(v)


def load_model(path: str | Path) -> WavefunctionModel:
    return parse_model_text(Path(path).read_text())


def model_to_text(model: WavefunctionModel) -> str:
    p = model.params
    lines = [f"kind={model.kind}"]
    for key in ("a", "b", "c", "d", "epsilon", "gamma1", "gamma2"):
        lines.append(f"{key}={getattr(p, key)!r}")
    return "\n".join(lines) + "\n"


# evaluation --------------------------------------------------------------

def _workspace(model):
    return K.workspace(model.md)


def eval_field(model: WavefunctionModel, x: float, y: float, t: float) -> FieldSample:
    """psi, its analytic gradient and the guidance velocity Im(grad psi / psi)."""
    if not math.isfinite(t):
        raise ConfigError("t must be finite")
    P, Px, Py = K.p_grad(float(x), float(y), float(t), model.md, _workspace(model))
    if abs(P) < model.singular_threshold:
        raise NodeSingularity(f"|psi| = {abs(P):.3e} at ({x}, {y}, t={t})")
    ax, ay = model.envelope
    # the kernels drop the phase of the first term; restore it for psi itself
    env = math.exp(-(ax * x * x + ay * y * y) / 2.0) * complex(math.cos(model._w[0] * t),
                                                               -math.sin(model._w[0] * t))
    psi = env * P
    gx = env * (Px - ax * x * P)
    gy = env * (Py - ay * y * P)
    den = abs(P) ** 2
    vel = ((Px * P.conjugate()).imag / den, (Py * P.conjugate()).imag / den)
    return FieldSample(complex(psi), (complex(gx), complex(gy)), vel)


def velocity_jacobian(model: WavefunctionModel, x: float, y: float, t: float) -> np.ndarray:
    *_, jxx, jxy, jyx, jyy, ok = K.velocity_jac(float(x), float(y), float(t), model.md,
                                                _workspace(model), model.thr2)
    if not ok:
        raise NodeSingularity(f"node at ({x}, {y}, t={t})")
    return np.array([[jxx, jxy], [jyx, jyy]])


def _basis_np(u: np.ndarray, kind: int, omega: float, n: int) -> list[np.ndarray]:
    if kind == K.MONOMIAL:
        return [u**k for k in range(n)]
    xi = math.sqrt(omega) * u
    out = [np.full_like(u, (omega / math.pi) ** 0.25, dtype=float)]
    if n > 1:
        out.append(math.sqrt(2.0) * xi * out[0])
    for k in range(1, n - 1):
        out.append(math.sqrt(2.0 / (k + 1)) * xi * out[k] - math.sqrt(k / (k + 1.0)) * out[k - 1])
    return out


def stripped_psi(model: WavefunctionModel, x, y, t: float) -> np.ndarray:
    """Envelope-free wavefunction P on arrays of points (numpy path)."""
    T, w, kind, ox, oy = model.kernel_args
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fx = _basis_np(x, kind, ox, T.shape[1])
    fy = _basis_np(y, kind, oy, T.shape[2])
    out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
    for k in range(T.shape[0]):
        acc = np.zeros_like(out)
        for n in range(T.shape[1]):
            for m in range(T.shape[2]):
                if T[k, n, m] != 0:
                    acc += T[k, n, m] * fx[n] * fy[m]
        out += np.exp(-1j * w[k] * t) * acc
    return out


def psi_values(model: WavefunctionModel, x, y, t: float) -> np.ndarray:
    ax, ay = model.envelope
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.exp(-(ax * x * x + ay * y * y) / 2.0) * stripped_psi(model, x, y, t)


def density(model: WavefunctionModel, x, y, t: float) -> np.ndarray:
    """Unnormalized |psi|^2."""
    return np.abs(psi_values(model, x, y, t)) ** 2


def harmonic3_velocity(x, y, t, a: float, b: float, c: float):
    """Closed-form guidance velocity of the three-term oscillator state (array-aware)."""
    sc = math.sqrt(c)
    G = (1 + a * a * x * x + b * b * c * x * x * y * y + 2 * a * x * np.cos(t)
         + 2 * b * sc * x * y * np.cos((1 + c) * t) + 2 * a * b * sc * x * x * y * np.cos(c * t))
    vx = -(a * np.sin(t) + b * sc * y * np.sin((1 + c) * t)) / G
    vy = -(b * sc * x * (a * x * np.sin(c * t) + np.sin((1 + c) * t))) / G
    return vx, vy


# nodal structure -------------------------------------------------------

def nodal_point(model: WavefunctionModel, t: float, tol: float = 1e-12) -> tuple[float, float]:
    """Closed-form moving node of the harmonic3 state at time ``t``."""
    if model.kind != "harmonic3":
        raise ConfigError("closed-form nodal point exists only for harmonic3")
    p = model.params
    s1c = math.sin((1 + p.c) * t)
    sct = math.sin(p.c * t)
    if abs(p.a * sct) < tol or abs(p.b * math.sqrt(p.c) * s1c) < tol:
        raise NodeAtInfinity(f"node escapes to infinity at t={t}")
    return -s1c / (p.a * sct), -p.a * math.sin(t) / (p.b * math.sqrt(p.c) * s1c)


def newton_node(model: WavefunctionModel, x: float, y: float, t: float,
                tol: float = 1e-13, max_iter: int = 50) -> tuple[float, float] | None:
    """Polish a zero of the stripped wavefunction with 2D Newton on (Re P, Im P)."""
    W = _workspace(model)
    x, y = float(x), float(y)
    for _ in range(max_iter):
        P, Px, Py = K.p_grad(x, y, t, model.md, W)
        J = np.array([[Px.real, Py.real], [Px.imag, Py.imag]])
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if det == 0 or not math.isfinite(det):
            return None
        dx = (J[1, 1] * P.real - J[0, 1] * P.imag) / det
        dy = (-J[1, 0] * P.real + J[0, 0] * P.imag) / det
        x -= dx
        y -= dy
        if abs(dx) + abs(dy) < tol * (1 + abs(x) + abs(y)):
            P = K.p_grad(x, y, t, model.md, W)[0]
            return (x, y) if abs(P) < 1e-9 * (1 + abs(x) * abs(y)) else None
    return None


def nodal_lines(model: WavefunctionModel, t_grid: Sequence[float],
                window: tuple[float, float, float, float] = (-6.0, 6.0, -6.0, 6.0),
                resolution: int = 200) -> np.ndarray:
    """Nodes of psi inside ``window`` = (xmin, xmax, ymin, ymax) at each time.

    Cells where both Re P and Im P change sign over their corners are
    candidates; each candidate is polished by Newton iteration and kept if it
    converges inside the window.  Returns rows ``(t, x, y)``.
    """
    if resolution < 2:
        raise ConfigError("resolution must be >= 2")
    x0, x1, y0, y1 = window
    if not (x1 > x0 and y1 > y0):
        raise ConfigError("empty window")
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    hx = xs[1] - xs[0]
    hy = ys[1] - ys[0]
    found = []
    for t in t_grid:
        P = stripped_psi(model, X, Y, float(t))
        cand = _sign_change_cells(P.real) & _sign_change_cells(P.imag)
        pts: list[tuple[float, float]] = []
        for i, j in zip(*np.nonzero(cand)):
            r = newton_node(model, xs[i] + hx / 2, ys[j] + hy / 2, float(t))
            if r is None:
                continue
            xr, yr = r
            if not (x0 <= xr <= x1 and y0 <= yr <= y1):
                continue
            if abs(xr - xs[i] - hx / 2) > 1.5 * hx or abs(yr - ys[j] - hy / 2) > 1.5 * hy:
                continue
            if any(abs(xr - px) < 1e-7 and abs(yr - py) < 1e-7 for px, py in pts):
                continue
            pts.append((xr, yr))
        found.extend((float(t), px, py) for px, py in pts)
    return np.array(found, dtype=float).reshape(-1, 3)


def _sign_change_cells(F: np.ndarray) -> np.ndarray:
    c = np.stack([F[:-1, :-1], F[1:, :-1], F[:-1, 1:], F[1:, 1:]])
    return (c.max(axis=0) >= 0) & (c.min(axis=0) <= 0)
