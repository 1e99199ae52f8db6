"""Gaussian processes with memory parameter ``d``.

The generalized spectral density is ``f(lam) = |1 - e^{-i lam}|^{-2d} f*(lam)`` and
autocovariances follow ``gamma(h) = int_{-pi}^{pi} f(lam) e^{i lam h} dlam``, so a white
noise with ``f = sigma^2`` has variance ``2 pi sigma^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import floor, gamma, pi, sin
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import zeta

__all__ = [
    "MemoryModel",
    "arfima",
    "white_noise",
    "fbm",
    "fgn",
    "custom",
    "parse_model",
    "fbm_fstar",
    "fgn_scale",
    "differencing_order",
]


def differencing_order(d: float) -> int:
    """Smallest non-negative integer ``K`` with ``K > d - 1/2``."""
    return max(0, floor(d - 0.5) + 1)


def fbm_fstar(lam, hurst: float) -> np.ndarray:
    """Short-memory factor of discrete-time FBM, normalised so that its value at 0 is 1.

    ``|2 sin(lam/2)/lam|^p + |2 sin(lam/2)|^p sum_{k != 0} |lam + 2 k pi|^-p`` with
    ``p = 2H + 1``; the lattice sum is two Hurwitz zeta values, so there is no truncation.
    """
    lam = np.asarray(lam, dtype=float)
    p = 2.0 * hurst + 1.0
    two_sin = np.abs(2.0 * np.sin(0.5 * lam))
    ratio = np.sinc(lam / (2 * pi))  # sin(lam/2) / (lam/2)
    x = lam / (2 * pi)
    lattice = (2 * pi) ** (-p) * (zeta(p, 1.0 + x) + zeta(p, 1.0 - x))
    return np.abs(ratio) ** p + two_sin**p * lattice


def fgn_scale(hurst: float) -> float:
    """Constant making fractional Gaussian noise of unit variance:
    ``int |1 - e^{-i xi}|^2 |xi|^{-2H-1} dxi = 2 pi / (Gamma(2H+1) sin(pi H))``."""
    return gamma(2 * hurst + 1) * sin(pi * hurst) / (2 * pi)


@dataclass(frozen=True)
class MemoryModel:
    """Memory parameter ``d`` plus a short-memory factor ``f*``.

    Parameters
    ----------
    d : float
        Memory parameter.
    fstar : callable
        Even, positive, bounded function on ``[-pi, pi]``.
    kind : str
        ``"arfima"``, ``"white"``, ``"fbm"``, ``"fgn"`` or ``"custom"``.
    params : dict
        Constructor arguments, echoed in reports.
    beta : float
        Smoothness of ``f*`` at zero, ``|f*(lam) - f*(0)| <= L f*(0) |lam|^beta``.
    """

    d: float
    fstar: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    beta: float = 2.0
    name: str = ""

    @property
    def K(self) -> int:
        return differencing_order(self.d)

    @property
    def fstar0(self) -> float:
        return float(np.asarray(self.fstar(np.zeros(1)))[0])

    def spectral_density(self, lam) -> np.ndarray:
        """``|1 - e^{-i lam}|^{-2d} f*(lam)``; raises at ``lam = 0`` when ``d > 0``."""
        lam = np.asarray(lam, dtype=float)
        if np.any(np.abs(lam) > pi + 1e-12):
            raise ValueError("frequencies must lie in [-pi, pi]")
        two_sin = np.abs(2.0 * np.sin(0.5 * lam))
        if self.d > 0 and np.any(two_sin == 0):
            raise ZeroDivisionError(f"spectral density has a non-integrable pole at 0 for d = {self.d} > 0")
        with np.errstate(divide="ignore"):
            return two_sin ** (-2.0 * self.d) * self.fstar(lam)

    def stabilized(self, lam, m: int) -> np.ndarray:
        """``|1 - e^{-i lam}|^{2(m - d)} f*(lam)``, bounded when ``m >= d``."""
        lam = np.asarray(lam, dtype=float)
        two_sin = np.abs(2.0 * np.sin(0.5 * lam))
        return two_sin ** (2.0 * (m - self.d)) * self.fstar(lam)

    def describe(self) -> str:
        return self.name or f"{self.kind}(d={self.d})"


def _poly_on_circle(coeffs: Sequence[float], lam: np.ndarray) -> np.ndarray:
    z = np.exp(-1j * lam)
    out = np.ones_like(z)
    for k, c in enumerate(coeffs, start=1):
        out = out - c * z**k
    return out


def arfima(
    d: float,
    ar: Sequence[float] = (),
    ma: Sequence[float] = (),
    sigma2: float = 1.0,
) -> MemoryModel:
    """ARFIMA(p, d, q) with ``f* = sigma2 |1 - sum theta_k e^{-ik lam}|^2 / |1 - sum phi_k e^{-ik lam}|^2``."""
    ar = tuple(float(a) for a in ar)
    ma = tuple(float(a) for a in ma)
    if sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    if ar:
        roots = np.roots(np.r_[-np.array(ar)[::-1], 1.0])
        if np.any(np.isclose(np.abs(roots), 1.0, atol=1e-10)):
            raise ValueError("AR polynomial vanishes on the unit circle")
    if ma and abs(1.0 - sum(ma)) < 1e-12:
        raise ValueError("MA polynomial vanishes at frequency 0, so f*(0) = 0")

    def fstar(lam):
        lam = np.asarray(lam, dtype=float)
        num = np.abs(_poly_on_circle(ma, lam)) ** 2 if ma else 1.0
        den = np.abs(_poly_on_circle(ar, lam)) ** 2 if ar else 1.0
        return sigma2 * num / den * np.ones_like(lam)

    return MemoryModel(
        d=float(d),
        fstar=fstar,
        kind="arfima",
        params={"d": float(d), "ar": list(ar), "ma": list(ma), "sigma2": float(sigma2)},
        beta=2.0,
        name=f"ARFIMA({len(ar)},{d},{len(ma)})",
    )


def white_noise(sigma2: float = 1.0) -> MemoryModel:
    """Constant ``f* = sigma2`` with ``d = 0``."""
    m = arfima(0.0, sigma2=sigma2)
    return MemoryModel(
        d=0.0, fstar=m.fstar, kind="white", params={"sigma2": float(sigma2)}, beta=2.0, name=f"white({sigma2})"
    )


def _check_hurst(h: float) -> float:
    h = float(h)
    if not 0 < h < 1:
        raise ValueError(f"Hurst index must lie in (0, 1), got {h}")
    return h


def fbm(hurst: float) -> MemoryModel:
    """Discrete-time fractional Brownian motion: ``d = H + 1/2`` and ``f*(0) = 1``."""
    h = _check_hurst(hurst)
    return MemoryModel(
        d=h + 0.5,
        fstar=lambda lam: fbm_fstar(lam, h),
        kind="fbm",
        params={"hurst": h},
        beta=min(2 * h + 1, 2.0),
        name=f"FBM(H={h})",
    )


def fgn(hurst: float) -> MemoryModel:
    """Unit-variance fractional Gaussian noise: ``d = H - 1/2``, ``f*`` the scaled FBM factor."""
    h = _check_hurst(hurst)
    scale = fgn_scale(h)
    return MemoryModel(
        d=h - 0.5,
        fstar=lambda lam: scale * fbm_fstar(lam, h),
        kind="fgn",
        params={"hurst": h},
        beta=min(2 * h + 1, 2.0),
        name=f"FGN(H={h})",
    )


def custom(d: float, fstar: Callable, beta: float = 2.0, name: str = "custom") -> MemoryModel:
    if not 0 < beta <= 2:
        raise ValueError(f"beta must lie in (0, 2], got {beta}")
    return MemoryModel(d=float(d), fstar=fstar, kind="custom", params={}, beta=float(beta), name=name)


def _floats(text: str) -> list:
    return [float(t) for t in text.split(",") if t.strip()]


def parse_model(text: str) -> MemoryModel:
    """Build a model from a short string.

    Accepted forms: ``fgn:H``, ``fbm:H``, ``white`` or ``white:sigma2`` and
    ``arfima:p,d,q`` optionally followed by ``;ar=a1,..;ma=b1,..;sigma2=s``.
    """
    head, _, rest = text.strip().partition(":")
    head = head.lower()
    if head in ("fgn", "fbm"):
        if not rest:
            raise ValueError(f"{head} needs a Hurst index, e.g. '{head}:0.7'")
        return (fgn if head == "fgn" else fbm)(float(rest))
    if head == "white":
        return white_noise(float(rest) if rest else 1.0)
    if head == "arfima":
        parts = rest.split(";")
        orders = _floats(parts[0])
        if len(orders) != 3:
            raise ValueError("arfima needs 'p,d,q', e.g. 'arfima:0,0.2,0'")
        p, d, q = int(orders[0]), orders[1], int(orders[2])
        opts = {}
        for part in parts[1:]:
            key, _, val = part.partition("=")
            opts[key.strip().lower()] = val
        ar = _floats(opts.get("ar", ""))
        ma = _floats(opts.get("ma", ""))
        if len(ar) != p or len(ma) != q:
            raise ValueError(f"arfima:{p},{d},{q} needs {p} AR and {q} MA coefficients via ';ar=..;ma=..'")
        return arfima(d, ar=ar, ma=ma, sigma2=float(opts.get("sigma2", 1.0)))
    raise ValueError(f"unknown model '{text}'; expected fgn:H, fbm:H, white[:s2] or arfima:p,d,q")
