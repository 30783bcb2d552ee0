"""Exact algebra of real trigonometric polynomials with two base frequencies.

A :class:`TrigPoly` represents

    f(t) = sum_{p, n1, n2} C[p, n1, n2] t^p exp(i (n1 + n2 c) t)

with ``C[p, -n1, -n2] = conj(C[p, n1, n2])`` so that ``f`` is real.  Frequencies
are tracked by their integer labels (n1, n2), so combinations that happen to
coincide numerically for a particular ``c`` are never merged.  A third label
for the combined frequency 1 + c is folded into (n1 + 1, n2 + 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np
from scipy.signal import convolve

from .errors import FrequencyCollision

COLLISION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TrigPoly:
    """Real trigonometric polynomial in ``t`` with frequencies n1 + n2 c.

    ``coeffs`` has shape (P, 2 K1 + 1, 2 K2 + 1); entry [p, K1 + n1, K2 + n2]
    multiplies t^p e^{i(n1 + n2 c) t}.
    """

    coeffs: np.ndarray
    c: float

    # construction ---------------------------------------------------------

    @classmethod
    def zero(cls, c: float) -> "TrigPoly":
        return cls(np.zeros((1, 1, 1), complex), c)

    @classmethod
    def const(cls, value: float, c: float) -> "TrigPoly":
        return cls(np.full((1, 1, 1), complex(value)), c)

    @classmethod
    def term(cls, kind: str, n1: int, n2: int, coeff: float, c: float, power: int = 0,
             n3: int = 0) -> "TrigPoly":
        """``coeff * t**power * kind((n1 + n2 c + n3 (1 + c)) t)`` with kind 'cos' or 'sin'."""
        n1, n2 = n1 + n3, n2 + n3
        K1, K2 = abs(n1), abs(n2)
        C = np.zeros((power + 1, 2 * K1 + 1, 2 * K2 + 1), complex)
        if kind == "cos":
            C[power, K1 + n1, K2 + n2] += coeff / 2
            C[power, K1 - n1, K2 - n2] += coeff / 2
        elif kind == "sin":
            if n1 == 0 and n2 == 0:
                return cls.zero(c)
            C[power, K1 + n1, K2 + n2] += coeff / 2j
            C[power, K1 - n1, K2 - n2] -= coeff / 2j
        else:
            raise ValueError(f"kind must be 'cos' or 'sin', not {kind!r}")
        return cls(C, c)

    @classmethod
    def cos(cls, n1: int, n2: int, c: float, coeff: float = 1.0) -> "TrigPoly":
        return cls.term("cos", n1, n2, coeff, c)

    @classmethod
    def sin(cls, n1: int, n2: int, c: float, coeff: float = 1.0) -> "TrigPoly":
        return cls.term("sin", n1, n2, coeff, c)

    # shape helpers ----------------------------------------------------------

    @property
    def half_widths(self) -> tuple[int, int]:
        return (self.coeffs.shape[1] - 1) // 2, (self.coeffs.shape[2] - 1) // 2

    @property
    def max_power(self) -> int:
        return self.coeffs.shape[0] - 1

    def _padded(self, P: int, K1: int, K2: int) -> np.ndarray:
        k1, k2 = self.half_widths
        out = np.zeros((P, 2 * K1 + 1, 2 * K2 + 1), complex)
        out[: self.coeffs.shape[0], K1 - k1: K1 + k1 + 1, K2 - k2: K2 + k2 + 1] = self.coeffs
        return out

    def trimmed(self) -> "TrigPoly":
        """Drop outer frequency rings and top powers that are exactly zero."""
        C = self.coeffs
        nz = np.nonzero(C)
        if nz[0].size == 0:
            return TrigPoly.zero(self.c)
        P = nz[0].max() + 1
        k1, k2 = self.half_widths
        K1 = int(np.abs(nz[1] - k1).max())
        K2 = int(np.abs(nz[2] - k2).max())
        return TrigPoly(C[:P, k1 - K1: k1 + K1 + 1, k2 - K2: k2 + K2 + 1].copy(), self.c)

    def frequency_grid(self) -> np.ndarray:
        k1, k2 = self.half_widths
        n1 = np.arange(-k1, k1 + 1)[:, None]
        n2 = np.arange(-k2, k2 + 1)[None, :]
        return n1 + n2 * self.c

    # arithmetic ---------------------------------------------------------------

    def _check(self, other: "TrigPoly") -> None:
        if other.c != self.c:
            raise ValueError("trigonometric polynomials with different c cannot be combined")

    def __add__(self, other):
        if not isinstance(other, TrigPoly):
            other = TrigPoly.const(float(other), self.c)
        self._check(other)
        P = max(self.coeffs.shape[0], other.coeffs.shape[0])
        K1 = max(self.half_widths[0], other.half_widths[0])
        K2 = max(self.half_widths[1], other.half_widths[1])
        return TrigPoly(self._padded(P, K1, K2) + other._padded(P, K1, K2), self.c)

    __radd__ = __add__

    def __neg__(self):
        return TrigPoly(-self.coeffs, self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TrigPoly):
            return TrigPoly(self.coeffs * float(other), self.c)
        self._check(other)
        if not self.coeffs.any() or not other.coeffs.any():
            return TrigPoly.zero(self.c)
        return TrigPoly(convolve(self.coeffs, other.coeffs, method="direct"), self.c).trimmed()

    __rmul__ = __mul__

    def __truediv__(self, value: float):
        return TrigPoly(self.coeffs / float(value), self.c)

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coeffs) <= tol))

    # calculus -----------------------------------------------------------------

    def _nonzero_frequency_mask(self) -> np.ndarray:
        """Mask of labels with nonzero numeric frequency; raises on collisions."""
        w = self.frequency_grid()
        k1, k2 = self.half_widths
        zero = np.abs(w) < COLLISION_TOL
        zero_label = np.zeros_like(zero)
        zero_label[k1, k2] = True
        clash = zero & ~zero_label & np.any(self.coeffs != 0, axis=0)
        if clash.any():
            i, j = np.argwhere(clash)[0]
            raise FrequencyCollision(
                f"label ({i - k1}, {j - k2}) has frequency {w[i, j]:.3g} ~ 0 for c={self.c}")
        return ~(zero & zero_label)

    def integrate(self) -> "TrigPoly":
        """Antiderivative vanishing at t = 0 (zero-frequency parts become secular)."""
        C = self.coeffs
        P = C.shape[0]
        k1, k2 = self.half_widths
        osc = self._nonzero_frequency_mask()
        iw = 1j * np.where(osc, self.frequency_grid(), 1.0)
        out = np.zeros((P + 1,) + C.shape[1:], complex)
        # oscillating part: int_0^t s^p e^{iws} ds by repeated parts
        for p in range(P):
            cp = np.where(osc, C[p], 0)
            if not cp.any():
                continue
            factor = cp / iw
            for q in range(p, -1, -1):
                out[q] += factor
                if q > 0:
                    factor = -factor * q / iw
            # lower limit of the last step: minus the value at s = 0
            out[0, k1, k2] -= np.sum(factor)
        # zero-frequency part
        for p in range(P):
            out[p + 1, k1, k2] += C[p, k1, k2] / (p + 1)
        return TrigPoly(out, self.c).trimmed()

    def derivative(self) -> "TrigPoly":
        C = self.coeffs
        P = C.shape[0]
        iw = 1j * self.frequency_grid()
        out = C * iw[None]
        for p in range(1, P):
            out[p - 1] += p * C[p]
        return TrigPoly(out, self.c).trimmed()

    # evaluation -----------------------------------------------------------------

    def __call__(self, t, chunk: int = 20000) -> np.ndarray | float:
        t_arr = np.atleast_1d(np.asarray(t, float))
        out = np.empty(t_arr.shape)
        k1, k2 = self.half_widths
        n1 = np.arange(-k1, k1 + 1)
        n2 = np.arange(-k2, k2 + 1)
        for s in range(0, t_arr.size, chunk):
            tt = t_arr.ravel()[s: s + chunk]
            E1 = np.exp(1j * np.outer(tt, n1))
            E2 = np.exp(1j * self.c * np.outer(tt, n2))
            acc = np.zeros(tt.size, complex)
            for p in range(self.coeffs.shape[0] - 1, -1, -1):
                acc = acc * tt + np.sum((E1 @ self.coeffs[p]) * E2, axis=1)
            out.ravel()[s: s + chunk] = acc.real
        return float(out[0]) if np.ndim(t) == 0 else out

    # real-form listing ------------------------------------------------------------

    def real_terms(self, tol: float = 0.0) -> Iterator[tuple[int, str, int, int, float]]:
        """Yield (power, kind, n1, n2, coeff) with n1 > 0 or (n1 == 0 and n2 >= 0)."""
        k1, k2 = self.half_widths
        for p in range(self.coeffs.shape[0]):
            for i in range(k1, 2 * k1 + 1):
                for j in range(2 * k2 + 1):
                    n1, n2 = i - k1, j - k2
                    if n1 == 0 and n2 < 0:
                        continue
                    z = self.coeffs[p, i, j]
                    if n1 == 0 and n2 == 0:
                        if abs(z.real) > tol:
                            yield p, "cos", 0, 0, float(z.real)
                        continue
                    if abs(z.real) > tol:
                        yield p, "cos", n1, n2, float(2 * z.real)
                    if abs(z.imag) > tol:
                        yield p, "sin", n1, n2, float(-2 * z.imag)

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[int, str, int, int, float]], c: float) -> "TrigPoly":
        acc = cls.zero(c)
        for p, kind, n1, n2, coeff in terms:
            acc = acc + cls.term(kind, n1, n2, coeff, c, power=p)
        return acc.trimmed()

    def secular_weight(self) -> float:
        """Sum of |coefficients| carried by terms with a positive power of t."""
        return float(np.abs(self.coeffs[1:]).sum())


def trig_mul(p: TrigPoly, q: TrigPoly) -> TrigPoly:
    return p * q


def trig_integrate(p: TrigPoly) -> TrigPoly:
    return p.integrate()

