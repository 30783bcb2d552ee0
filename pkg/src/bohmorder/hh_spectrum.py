"""Hénon-Heiles eigenstates from a truncated two-dimensional oscillator basis.

The Hamiltonian

    H = (p_x^2 + w1^2 x^2)/2 + (p_y^2 + w2^2 y^2)/2 + eps (x y^2 - x^3/3)

is written in the product basis of normalized Hermite functions
``phi_n(x) phi_m(y)``, ordered by total quantum number.  Position matrices come
from the ladder relation <n|x|n+1> = sqrt((n+1)/(2 w)), so every matrix element
is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as K
from .errors import ConvergenceFailure, InvalidTruncation
from .models import EigenTerm, ModelParams, WavefunctionModel

HH_EPSILON = 0.1118034
HH_OMEGA2 = math.sqrt(2.0) / 2.0
MIN_SIZE = 10


def index_map(n: int, m: int) -> int:
    """1-based position of the product state (n, m) in shell order."""
    if n < 0 or m < 0:
        raise ValueError("quantum numbers must be non-negative")
    s = n + m
    return m + 1 + s * (s + 1) // 2


def inverse_index(i: int) -> tuple[int, int]:
    """Quantum numbers (n, m) for the 1-based index ``i``."""
    if i < 1:
        raise ValueError("index must be >= 1")
    s = (math.isqrt(8 * (i - 1) + 1) - 1) // 2
    m = i - 1 - s * (s + 1) // 2
    return s - m, m


@dataclass(frozen=True)
class BasisIndex:
    n: int
    m: int

    @property
    def i(self) -> int:
        return index_map(self.n, self.m)


def basis_states(K_size: int) -> list[BasisIndex]:
    return [BasisIndex(*inverse_index(i)) for i in range(1, K_size + 1)]


def position_matrix(size: int, omega: float) -> np.ndarray:
    """Matrix of x between the first ``size`` oscillator states of frequency ``omega``."""
    off = np.sqrt(np.arange(1, size) / (2.0 * omega))
    return np.diag(off, 1) + np.diag(off, -1)


def build_matrix(omega1: float, omega2: float, epsilon: float, K_size: int) -> np.ndarray:
    """Hamiltonian matrix over the first ``K_size`` product states."""
    if K_size < MIN_SIZE:
        raise InvalidTruncation(f"K must be at least {MIN_SIZE}, got {K_size}")
    if not (omega1 > 0 and omega2 > 0):
        raise ValueError("frequencies must be positive")
    states = basis_states(K_size)
    n = np.array([s.n for s in states])
    m = np.array([s.m for s in states])
    # pad by 3 so the truncated powers are exact on the states we keep
    X = position_matrix(n.max() + 4, omega1)
    Y = position_matrix(m.max() + 3, omega2)
    X3 = X @ X @ X
    Y2 = Y @ Y
    N1, N2 = np.meshgrid(n, n, indexing="ij")
    M1, M2 = np.meshgrid(m, m, indexing="ij")
    H = epsilon * (X[N1, N2] * Y2[M1, M2] - X3[N1, N2] * (M1 == M2) / 3.0)
    H[np.diag_indices(K_size)] += (n + 0.5) * omega1 + (m + 0.5) * omega2
    return 0.5 * (H + H.T)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenpairs of a truncated Hamiltonian.

    ``eigenvectors[k]`` holds the coefficients of eigenstate ``k`` over the
    basis; ``labels[k]`` is the (n, m) basis state it overlaps most, which
    becomes its quantum-number assignment.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    labels: tuple[tuple[int, int], ...]
    omega1: float
    omega2: float
    epsilon: float

    @property
    def size(self) -> int:
        return self.eigenvalues.shape[0]

    def find(self, n: int, m: int) -> int:
        """Position of the lowest eigenstate labelled (n, m)."""
        for k, lab in enumerate(self.labels):
            if lab == (n, m):
                return k
        raise InvalidTruncation(f"no eigenstate labelled {(n, m)} at K={self.size}")

    def energy(self, n: int, m: int) -> float:
        return float(self.eigenvalues[self.find(n, m)])

    def coefficient_grid(self, n: int, m: int) -> np.ndarray:
        """Coefficients of state (n, m) arranged as C[n', m'] over Hermite functions."""
        vec = self.eigenvectors[self.find(n, m)]
        states = basis_states(self.size)
        C = np.zeros((max(s.n for s in states) + 1, max(s.m for s in states) + 1))
        for s, v in zip(states, vec):
            C[s.n, s.m] = v
        return C

    def save(self, path: str | Path) -> None:
        np.savez(path, K=self.size, omega1=self.omega1, omega2=self.omega2, epsilon=self.epsilon,
                 eigenvalues=self.eigenvalues, eigenvectors=self.eigenvectors,
                 labels=np.array(self.labels, dtype=int))

    @classmethod
    def load(cls, path: str | Path) -> "Spectrum":
        with np.load(path) as f:
            return cls(f["eigenvalues"], f["eigenvectors"], tuple(map(tuple, f["labels"].tolist())),
                       float(f["omega1"]), float(f["omega2"]), float(f["epsilon"]))


def diagonalize(H: np.ndarray, omega1: float = 1.0, omega2: float = HH_OMEGA2,
                epsilon: float = 0.0) -> Spectrum:
    """Diagonalize a symmetric matrix built by :func:`build_matrix`."""
    H = np.asarray(H, float)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or not np.allclose(H, H.T, rtol=0, atol=1e-14):
        raise ValueError("matrix must be square and symmetric")
    try:
        vals, vecs = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    vecs = vecs.T.copy()
    dom = np.argmax(np.abs(vecs), axis=1)
    vecs *= np.sign(vecs[np.arange(len(dom)), dom])[:, None]
    labels = tuple(inverse_index(int(j) + 1) for j in dom)
    return Spectrum(vals, vecs, labels, omega1, omega2, epsilon)


def build_spectrum(omega1: float = 1.0, omega2: float = HH_OMEGA2, epsilon: float = HH_EPSILON,
                   K_size: int = 200) -> Spectrum:
    return diagonalize(build_matrix(omega1, omega2, epsilon, K_size), omega1, omega2, epsilon)


def hh_wavefunction(spectrum: Spectrum, a: float = 1.0, b: float = 1.0) -> WavefunctionModel:
    """Superposition of the (0,0), (1,0) and (1,1) eigenstates with amplitudes 1, a, b."""
    if spectrum.size < 200:
        raise InvalidTruncation("the three-state superposition needs K >= 200")
    terms = tuple(
        EigenTerm(amp, spectrum.energy(n, m), f"hh{n}{m}", coeffs=spectrum.coefficient_grid(n, m))
        for amp, (n, m) in ((1.0, (0, 0)), (a, (1, 0)), (b, (1, 1)))
    )
    params = ModelParams(a=a, b=b, c=spectrum.omega2, epsilon=spectrum.epsilon)
    return WavefunctionModel("henonheiles3", terms, params, basis=K.HERMITE,
                             envelope=(spectrum.omega1, spectrum.omega2))
