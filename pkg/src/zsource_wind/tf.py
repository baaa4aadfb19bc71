"""Rational transfer functions in the Laplace variable.

Coefficients are stored in ascending powers of ``s`` so that ``num[k]``
multiplies ``s**k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def _trim(coeffs: Sequence[float]) -> tuple[float, ...]:
    c = [float(x) for x in coeffs]
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    if not c:
        c = [0.0]
    return tuple(c)


@dataclass(frozen=True)
class RationalTF:
    num: tuple[float, ...]
    den: tuple[float, ...]

    def __post_init__(self):
        num = _trim(self.num)
        den = _trim(self.den)
        if den == (0.0,):
            raise ValueError("denominator is identically zero")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @classmethod
    def from_descending(cls, num, den) -> "RationalTF":
        return cls(tuple(np.asarray(num, float)[::-1]), tuple(np.asarray(den, float)[::-1]))

    @classmethod
    def constant(cls, k: float) -> "RationalTF":
        return cls((k,), (1.0,))

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        return np.polynomial.polynomial.polyval(s, self.num) / np.polynomial.polynomial.polyval(
            s, self.den)

    def normalized(self) -> "RationalTF":
        """Scale so the highest-order denominator coefficient is one."""
        lead = self.den[-1]
        return RationalTF(tuple(x / lead for x in self.num), tuple(x / lead for x in self.den))

    def zeros(self) -> np.ndarray:
        if len(self.num) == 1:
            return np.array([], dtype=complex)
        return np.polynomial.polynomial.polyroots(self.num).astype(complex)

    def poles(self) -> np.ndarray:
        if len(self.den) == 1:
            return np.array([], dtype=complex)
        return np.polynomial.polynomial.polyroots(self.den).astype(complex)

    def dc_gain(self) -> float:
        if self.den[0] == 0.0:
            return float("inf") if self.num[0] != 0.0 else float("nan")
        return self.num[0] / self.den[0]

    def __mul__(self, other: "RationalTF") -> "RationalTF":
        P = np.polynomial.polynomial
        return RationalTF(tuple(P.polymul(self.num, other.num)), tuple(P.polymul(self.den, other.den)))

    def __add__(self, other: "RationalTF") -> "RationalTF":
        P = np.polynomial.polynomial
        num = P.polyadd(P.polymul(self.num, other.den), P.polymul(other.num, self.den))
        return RationalTF(tuple(num), tuple(P.polymul(self.den, other.den)))

    def feedback(self) -> "RationalTF":
        """Unity negative feedback closure ``G / (1 + G)``."""
        P = np.polynomial.polynomial
        return RationalTF(self.num, tuple(P.polyadd(self.den, self.num)))


def freq_response(tf: RationalTF, omega_grid) -> list[tuple[float, float]]:
    """Magnitude in dB and phase in degrees of ``tf(j*omega)``.

    Evaluation exactly on an imaginary-axis pole gives ``inf`` magnitude and
    ``nan`` phase for that point; the phase is unwrapped across the grid.
    """
    w = np.asarray(omega_grid, dtype=float)
    if w.ndim != 1 or np.any(w <= 0) or np.any(np.diff(w) <= 0):
        raise ValueError("omega_grid must be strictly positive and ascending")
    jw = 1j * w
    num = np.polynomial.polynomial.polyval(jw, tf.num)
    den = np.polynomial.polynomial.polyval(jw, tf.den)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = num / den
        mag = 20.0 * np.log10(np.abs(h))
    finite = np.isfinite(h) & (den != 0)
    mag = np.where(den == 0, np.inf, mag)
    phase = np.full(w.shape, np.nan)
    if finite.any():
        phase[finite] = np.degrees(np.unwrap(np.angle(h[finite])))
    return [(float(m), float(p)) for m, p in zip(mag, phase)]


def response_mismatch(a: RationalTF, b: RationalTF, omega_grid) -> tuple[float, float]:
    """Largest magnitude (dB) and wrapped phase (deg) difference between two TFs."""
    jw = 1j * np.asarray(omega_grid, dtype=float)
    ratio = a(jw) / b(jw)
    mag = np.abs(20.0 * np.log10(np.abs(ratio)))
    phase = np.abs(np.degrees(np.angle(ratio)))
    return float(mag.max()), float(phase.max())


def bandwidth(tf: RationalTF, w_min: float = 1e-2, w_max: float = 1e6, points: int = 4000) -> float:
    """Highest frequency (rad/s) at which the gain is still within -3 dB of the low-frequency gain."""
    w = np.logspace(np.log10(w_min), np.log10(w_max), points)
    g = np.abs(tf(1j * w))
    ref = g[0]
    above = np.nonzero(g >= ref / np.sqrt(2.0))[0]
    if above.size == 0:
        return 0.0
    k = above[-1]
    if k == w.size - 1:
        return float(w[-1])
    # log-linear interpolation to the crossing
    g0, g1 = np.log(g[k]), np.log(g[k + 1])
    target = np.log(ref / np.sqrt(2.0))
    frac = (g0 - target) / (g0 - g1) if g0 != g1 else 0.0
    return float(np.exp(np.log(w[k]) + frac * (np.log(w[k + 1]) - np.log(w[k]))))
