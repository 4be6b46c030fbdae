"""Periodic time cutoffs and the partition of unity.

Two bumps control the alternating shear layers:

* ``eta1`` lives in (1/8, 3/8) mod 1 and switches on the xi1-dependent layer,
* ``eta2`` lives in (5/8, 7/8) mod 1 and switches on the xi2-dependent layer.

Both are scaled copies of the standard bump exp(1/(s^2-1)).  They are
normalized so that (integral of eta_i^2 over one period) * (integral of
sin^2(2 pi s) over one period) = 1, which places <eta_i^2> = 2.

``eta_tilde`` is a mollified trapezoid, equal to 1 on (-3/8, 3/8) and
supported in [-5/8, 5/8], whose integer translates sum to one.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import ResolutionError

__all__ = [
    "bump",
    "PeriodicProfile",
    "CutoffFamily",
    "build_cutoffs",
    "check_shear_pair",
    "H12",
]

ETA1_SUPPORT = (1.0 / 8.0, 3.0 / 8.0)
ETA2_SUPPORT = (5.0 / 8.0, 7.0 / 8.0)
TILDE_INNER = 3.0 / 8.0
TILDE_OUTER = 5.0 / 8.0


def bump(s):
    """Standard bump exp(1/(s^2 - 1)) on (-1, 1), zero elsewhere."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(1.0 / (si * si - 1.0))
    return out


def _mod_in(tau, a, b, period):
    """Mask of points of ``tau`` lying in (a, b) modulo ``period``."""
    r = np.mod(np.asarray(tau, dtype=float) - a, period)
    return (r > 0.0) & (r < b - a)


@dataclass
class PeriodicProfile:
    """Samples of a smooth periodic function with spectral access.

    Parameters
    ----------
    samples : ndarray, shape (M,)
        Values at ``tau_j = j * period / M``.
    period : float
    support : list of (a, b)
        Declared open support, intervals taken modulo ``period``.
        ``None`` means no claim.
    exact : callable, optional
        Closed-form evaluator.  When present it is used for point values,
        otherwise points are evaluated by trigonometric interpolation.
    """

    samples: np.ndarray
    period: float = 1.0
    support: Optional[list] = None
    exact: Optional[Callable] = None
    name: str = ""
    _coef: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def M(self):
        return self.samples.shape[0]

    @property
    def grid(self):
        return np.arange(self.M) * (self.period / self.M)

    @property
    def coeffs(self):
        """Complex coefficients c_k of sum_k c_k exp(2 pi i k tau / period), k >= 0."""
        if self._coef is None:
            c = np.fft.rfft(self.samples) / self.M
            # fold the conjugate half into the k > 0 coefficients
            c[1:] *= 2.0
            if self.M % 2 == 0:
                c[-1] *= 0.5
            self._coef = c
        return self._coef

    @property
    def mean(self):
        return float(self.coeffs[0].real)

    def max_abs(self):
        return float(np.max(np.abs(self.samples)))

    def interp(self, tau):
        """Trigonometric interpolant evaluated at arbitrary points."""
        tau = np.asarray(tau, dtype=float)
        flat = tau.reshape(-1)
        k = np.arange(self.coeffs.shape[0])
        phase = np.exp(2j * np.pi * np.outer(flat / self.period, k))
        vals = (phase @ self.coeffs).real
        return vals.reshape(tau.shape)

    def __call__(self, tau):
        if self.exact is not None:
            return self.exact(tau)
        return self.interp(tau)

    def roundtrip_error(self):
        """Relative error of sampling the trigonometric interpolant back onto the grid."""
        back = self.interp(self.grid)
        scale = max(self.max_abs(), 1e-300)
        return float(np.max(np.abs(back - self.samples)) / scale)

    def outside_support_max(self, tau=None):
        """max |profile| outside the declared support, relative to max |profile|."""
        if self.support is None:
            return 0.0
        tau = self.grid if tau is None else np.asarray(tau, dtype=float)
        vals = np.abs(self(tau))
        inside = np.zeros(tau.shape, dtype=bool)
        for a, b in self.support:
            inside |= _mod_in(tau, a, b, self.period)
        out = vals[~inside]
        return float(out.max() / self.max_abs()) if out.size else 0.0

    def _spectral(self, mult, name, support):
        k = np.fft.rfftfreq(self.M, d=1.0 / self.M)
        hat = np.fft.rfft(self.samples) * mult(k)
        return PeriodicProfile(np.fft.irfft(hat, n=self.M), self.period,
                               support, None, name)

    def derivative(self, p=1):
        """p-th derivative by spectral differentiation."""
        if p == 0:
            return self
        w = 2.0 * np.pi / self.period

        def mult(k):
            m = (1j * w * k) ** p
            if self.M % 2 == 0 and p % 2 == 1:
                m[-1] = 0.0
            return m

        return self._spectral(mult, f"d^{p} {self.name}", self.support)

    def antiderivative(self):
        """Mean-zero antiderivative of (f - <f>)."""
        w = 2.0 * np.pi / self.period

        def mult(k):
            m = np.zeros(k.shape, dtype=complex)
            m[1:] = 1.0 / (1j * w * k[1:])
            if self.M % 2 == 0:
                m[-1] = 0.0
            return m

        return self._spectral(mult, f"int {self.name}", None)

    def cumulative(self, tau):
        """Integral of the profile from 0 to ``tau`` (any real tau)."""
        if not hasattr(self, "_anti"):
            self._anti = self.antiderivative()
            self._anti0 = float(self._anti.interp(0.0))
        tau = np.asarray(tau, dtype=float)
        return self.mean * tau + self._anti.interp(tau) - self._anti0

    def square(self, name=None):
        """Pointwise square, keeping the support claim."""
        ex = None if self.exact is None else (lambda t, f=self.exact: f(t) ** 2)
        return PeriodicProfile(self.samples ** 2, self.period, self.support, ex,
                               name or f"{self.name}^2")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "value"])
            for t, v in zip(self.grid, self.samples):
                w.writerow([repr(float(t)), repr(float(v))])


@dataclass
class CutoffFamily:
    """eta1, eta2 and eta_tilde with their normalization constants."""

    eta1: PeriodicProfile
    eta2: PeriodicProfile
    etaTilde: PeriodicProfile
    c1: float
    c2: float
    eps0: float
    M: int

    def window(self, tau):
        """eta_tilde at arbitrary real argument (zero outside [-5/8, 5/8])."""
        return self.etaTilde.exact(tau)

    @staticmethod
    def active_windows(tau):
        """Integers iota with eta_tilde(tau - iota) possibly nonzero."""
        lo = int(np.floor(tau - TILDE_OUTER)) + 1
        hi = int(np.ceil(tau + TILDE_OUTER)) - 1
        return [i for i in range(lo, hi + 1) if abs(tau - i) < TILDE_OUTER]

    def weights(self, tau):
        """(iota, weight) pairs of the partition of unity at ``tau``."""
        out = []
        for i in self.active_windows(tau):
            w = float(self.window(tau - i))
            if w != 0.0:
                out.append((i, w))
        return out

    def etas(self, tau):
        """(eta1(tau), eta2(tau)) at a scalar argument."""
        return float(self.eta1.exact(tau)), float(self.eta2.exact(tau))


def H12(xi1, xi2, tau, family: CutoffFamily):
    """eta1(tau) sin(2 pi xi1) + eta2(tau) sin(2 pi xi2)."""
    e1, e2 = family.etas(tau)
    out = 0.0
    if e1 != 0.0:
        out = out + e1 * np.sin(2.0 * np.pi * xi1)
    if e2 != 0.0:
        out = out + e2 * np.sin(2.0 * np.pi * xi2)
    return out


def _bump_sq_integral():
    val, _ = integrate.quad(lambda s: float(bump(s)) ** 2, -1.0, 1.0,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def _make_eta(centre, support, c):
    half = 0.5 * (support[1] - support[0])

    def exact(tau):
        tau = np.asarray(tau, dtype=float)
        r = np.mod(tau - centre + 0.5, 1.0) - 0.5
        return c * bump(r / half)

    return exact


class _RampKernel:
    """g(z) = integral over s < z of (z - s) phi(s) ds for the normalized bump phi.

    For z <= 0 the integral is done by Gauss-Legendre quadrature; for z > 0 the
    identity g(z) - g(-z) = z (phi even with unit mass) is used, which makes
    the integer translates of the mollified trapezoid sum to one up to
    rounding.
    """

    def __init__(self, n=200):
        x, w = np.polynomial.legendre.leggauss(n)
        self.x, self.w = x, w
        self.Z = float(np.sum(w * bump(x)))

    def _neg(self, z):
        # z in [-1, 0]
        s = -1.0 + np.outer(z + 1.0, self.x + 1.0) * 0.5
        f = (z[:, None] - s) * bump(s)
        return (f @ self.w) * (z + 1.0) * 0.5 / self.Z

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        flat = z.reshape(-1)
        out = np.zeros_like(flat)
        big = flat >= 1.0
        out[big] = flat[big]
        neg = (flat > -1.0) & (flat <= 0.0)
        out[neg] = self._neg(flat[neg])
        pos = (flat > 0.0) & (flat < 1.0)
        out[pos] = flat[pos] + self._neg(-flat[pos])
        return out.reshape(z.shape)


def _make_tilde(eps0):
    g = _RampKernel()
    a = TILDE_INNER + eps0
    bb = TILDE_OUTER - eps0
    width = bb - a

    def G(y):
        return eps0 * g(y / eps0)

    def exact(tau):
        tau = np.asarray(tau, dtype=float)
        r = np.abs(tau)
        out = 1.0 - (G(r - a) - G(r - bb)) / width
        out = np.where(r <= TILDE_INNER, 1.0, out)
        out = np.where(r >= TILDE_OUTER, 0.0, out)
        return out

    return exact


def build_cutoffs(M: int = 4096, eps0: float = 1.0 / 64.0) -> CutoffFamily:
    """Build eta1, eta2 and eta_tilde sampled with ``M`` points per unit period.

    Raises
    ------
    ResolutionError
        If fewer than 8 samples fall across the mollification width 2*eps0.
    """
    if M < 256 or (M & (M - 1)) != 0:
        raise ValueError("M must be a power of two >= 256")
    if not 0.0 < eps0 < 1.0 / 32.0:
        raise ValueError("eps0 must lie in (0, 1/32)")
    if 2.0 * eps0 * M < 8.0:
        raise ResolutionError(
            f"M={M} puts {2 * eps0 * M:.1f} samples across the mollifier width 2*eps0")

    # integral of c^2 bump(8(tau - centre))^2 dtau = c^2 I / 8, and we want 2
    I = _bump_sq_integral()
    half = 0.5 * (ETA1_SUPPORT[1] - ETA1_SUPPORT[0])
    c = np.sqrt(2.0 / (I * half))
    tau = np.arange(M) / M
    ex1 = _make_eta(0.5 * sum(ETA1_SUPPORT), ETA1_SUPPORT, c)
    ex2 = _make_eta(0.5 * sum(ETA2_SUPPORT), ETA2_SUPPORT, c)
    eta1 = PeriodicProfile(ex1(tau), 1.0, [ETA1_SUPPORT], ex1, "eta1")
    eta2 = PeriodicProfile(ex2(tau), 1.0, [ETA2_SUPPORT], ex2, "eta2")

    # eta_tilde is not 1-periodic; store it on a period-2 grid centred at 0
    ext = _make_tilde(eps0)
    t2 = np.arange(2 * M) / M
    t2c = np.where(t2 >= 1.0, t2 - 2.0, t2)
    tilde = PeriodicProfile(ext(t2c), 2.0, [(-TILDE_OUTER, TILDE_OUTER)], ext,
                            "eta_tilde")
    return CutoffFamily(eta1, eta2, tilde, float(c), float(c), eps0, M)


def _within(inner, outer, period=1.0):
    """True if every interval of ``inner`` sits inside some interval of ``outer`` mod period."""
    for a, b in inner:
        ok = False
        for c, d in outer:
            shift = np.floor((a - c) / period) * period
            if c + shift <= a and b <= d + shift + 1e-15:
                ok = True
                break
        if not ok:
            return False
    return True


def _support_of(eta: PeriodicProfile):
    if eta.support is not None:
        return list(eta.support)
    # numeric fallback: runs of samples above the leakage floor
    on = np.abs(eta.samples) > 1e-12 * max(eta.max_abs(), 1e-300)
    if not on.any():
        return []
    h = eta.period / eta.M
    idx = np.flatnonzero(on)
    runs, start = [], idx[0]
    for i, j in zip(idx[:-1], idx[1:]):
        if j != i + 1:
            runs.append(((start - 1) * h, (i + 1) * h))
            start = j
    runs.append(((start - 1) * h, (idx[-1] + 1) * h))
    return runs


def check_shear_pair(chiAxis: str, eta: PeriodicProfile, family: CutoffFamily) -> bool:
    """Shear-condition test for a (spatial profile, time cutoff) pair.

    Parameters
    ----------
    chiAxis : {"xi1-only", "xi2-only", "constant"}
        Which fast variable the spatial profile depends on.  "xi1-only" means
        d chi / d xi2 = 0.
    eta : PeriodicProfile
        Time profile with known support.
    """
    if chiAxis not in ("xi1-only", "xi2-only", "constant"):
        raise ValueError(f"unknown chiAxis {chiAxis!r}")
    if chiAxis == "constant":
        return True
    supp = _support_of(eta)
    if chiAxis == "xi1-only":
        return _within(supp, family.eta1.support)
    return _within(supp, family.eta2.support)
