"""Diagnostics: dissipation, Littlewood-Paley shells, Hölder estimates, mollifiers.

Shells use sharp annuli in the integer frequency |n| (no 2 pi):
shell 0 is |n| = 1 and shell j >= 1 is 2^(j-1) < |n| <= 2^j.  Sharp cutoffs
are exact projections on the grid, which is what the algebraic checks need;
the ``holder_norm`` built on them is the usual dyadic equivalent norm,
truncated at the grid's largest frequency (so it under-estimates fields
with unresolved content).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import special

from .grid import GridField2D, spectral

__all__ = ["ShellDecomposition", "HolderEstimate", "shell_index", "lp_decompose",
           "holder_norm", "dissipation", "MollifierKernel", "mollifier", "mollify",
           "datum_shells", "random_datum", "sobolev_norm"]


def _as_field(f) -> GridField2D:
    return f if isinstance(f, GridField2D) else GridField2D(np.asarray(f, dtype=float))


def shell_index(N: int) -> np.ndarray:
    """Shell label of every half-spectrum mode; -1 for the zero mode."""
    sp = spectral(N)
    r2 = np.rint(sp.nsq).astype(np.int64)
    j = np.full(r2.shape, -1, dtype=int)
    nz = r2 > 0
    # smallest j with |n| <= 2^j, i.e. n^2 <= 4^j; exact in integers
    jj = np.zeros(r2.shape, dtype=int)
    bound = np.ones(r2.shape, dtype=np.int64)
    while True:
        short = nz & (r2 > bound)
        if not short.any():
            break
        jj[short] += 1
        bound[short] *= 4
    j[nz] = jj[nz]
    return j


@dataclass
class ShellDecomposition:
    """Delta_j rho for j = 0..J as half spectra, with their norms."""

    N: int
    spectra: List[np.ndarray]
    mean: float
    t: float = 0.0

    @property
    def J(self):
        return len(self.spectra) - 1

    def shell(self, j) -> GridField2D:
        return GridField2D.from_hat(self.spectra[j], self.N, self.t, f"shell{j}")

    def sup_norms(self):
        sp = spectral(self.N)
        return np.array([float(np.max(np.abs(sp.ifft(S)))) for S in self.spectra])

    def l2_norms(self):
        sp = spectral(self.N)
        return np.array([math.sqrt(float(sp.mean_sq(S))) for S in self.spectra])

    def reconstruct(self) -> GridField2D:
        R = np.sum(self.spectra, axis=0)
        R[0, 0] = self.mean * self.N ** 2
        return GridField2D.from_hat(R, self.N, self.t, "reconstructed")

    def to_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["j", "sup", "l2"])
            for j, (s, l) in enumerate(zip(self.sup_norms(), self.l2_norms())):
                w.writerow([j, repr(float(s)), repr(float(l))])


def lp_decompose(f) -> ShellDecomposition:
    """Sharp Littlewood-Paley split; the shells sum to f - mean(f)."""
    f = _as_field(f)
    N = f.N
    F = f.hat
    lab = shell_index(N)
    J = int(lab.max())
    spectra = [np.where(lab == j, F, 0.0) for j in range(J + 1)]
    return ShellDecomposition(N, spectra, float(f.mean), f.t)


@dataclass
class HolderEstimate:
    """max_j 2^(j alpha) ||Delta_j rho||_inf and the per-shell terms."""

    alpha: float
    value: float
    contributions: np.ndarray
    t: float = 0.0

    @property
    def argmax(self):
        return int(np.argmax(self.contributions))


def holder_norm(f, alpha: float, decomposition: Optional[ShellDecomposition] = None) -> HolderEstimate:
    """Dyadic C^alpha estimate of the mean-free part of ``f``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    dec = decomposition or lp_decompose(f)
    sup = dec.sup_norms()
    w = 2.0 ** (alpha * np.arange(len(sup)))
    contrib = w * sup
    return HolderEstimate(alpha, float(contrib.max()), contrib, dec.t)


def dissipation(trace) -> float:
    """kappa * int_0^T ||grad rho||^2 dt by the trapezoid rule over the trace."""
    t = np.asarray(trace.t, dtype=float)
    d = np.asarray(trace.inst_diss, dtype=float)
    if t.size < 2:
        return 0.0
    return float(np.sum(0.5 * np.diff(t) * (d[1:] + d[:-1])))


# -- mollification --------------------------------------------------------------

def _base_profile(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


_GL_R, _GL_W = np.polynomial.legendre.leggauss(160)
_GL_R = 0.5 * (_GL_R + 1.0)
_GL_W = 0.5 * _GL_W
_BASE_MASS = 2.0 * np.pi * float(np.sum(_GL_W * _base_profile(_GL_R) * _GL_R))


def _base_hat(k):
    """Radial transform 2 pi int_0^1 phi(r) J0(k r) r dr of the unit-mass bump."""
    k = np.asarray(k, dtype=float)
    flat = k.reshape(-1)
    vals = special.j0(np.outer(flat, _GL_R)) @ (_GL_W * _base_profile(_GL_R) * _GL_R)
    return (2.0 * np.pi * vals / _BASE_MASS).reshape(k.shape)


@dataclass(frozen=True)
class MollifierKernel:
    """m = sum_k a_k s_k^-2 phi(x / s_k) for a radial unit-mass bump phi on |x| < 1.

    Radial symmetry kills every odd moment; the weights a_k make the mass 1
    and the even moments up to ``depth`` vanish.  Support radius is max s_k.
    """

    depth: int
    weights: tuple
    scales: tuple

    def moment_weights(self):
        """sum_k a_k s_k^(2p) for p = 0..depth//2 (1, 0, 0, ...)."""
        a, s = np.array(self.weights), np.array(self.scales)
        return [float(np.sum(a * s ** (2 * p))) for p in range(self.depth // 2 + 1)]

    def hat(self, k):
        """Fourier transform at |xi| = k (radians per unit length), for unit ell."""
        out = 0.0
        for a, s in zip(self.weights, self.scales):
            out = out + a * _base_hat(np.asarray(k) * s)
        return out

    def profile(self, r):
        out = 0.0
        for a, s in zip(self.weights, self.scales):
            out = out + a * _base_profile(np.asarray(r) / s) / (s * s * _BASE_MASS)
        return out


def mollifier(depth: int) -> MollifierKernel:
    if depth not in (1, 2, 3):
        raise ValueError("depth must be 1, 2 or 3")
    n = depth // 2 + 1
    scales = tuple(2.0 ** -k for k in range(n))
    # Vandermonde in s^2: sum a_k s_k^(2p) = [p == 0]
    V = np.array([[s ** (2 * p) for s in scales] for p in range(n)])
    rhs = np.zeros(n)
    rhs[0] = 1.0
    a = np.linalg.solve(V, rhs)
    return MollifierKernel(depth, tuple(float(x) for x in a), scales)


def mollify(f, ell: float, depth: int) -> GridField2D:
    """Convolution with m_ell(x) = ell^-2 m(x / ell), applied as a spectral multiplier."""
    if not 0.0 < ell < 0.25:
        raise ValueError("ell must lie in (0, 1/4)")
    f = _as_field(f)
    N = f.N
    sp = spectral(N)
    kern = mollifier(depth)
    r2 = np.rint(sp.nsq).astype(np.int64)
    uniq, inv = np.unique(r2, return_inverse=True)
    mult = kern.hat(2.0 * np.pi * ell * np.sqrt(uniq.astype(float)))[inv.reshape(r2.shape)]
    if f.is_vector:
        F = f.hat * mult[None]
    else:
        F = f.hat * mult
    return GridField2D.from_hat(F, N, f.t, f"{f.tag}*m_ell")


# -- initial data -----------------------------------------------------------------

def datum_shells(rho_in, schedule: Sequence[float], kmax: int) -> List[GridField2D]:
    """rho_in,k = sum over j in Lambda_k of Delta_j rho_in for k = 0..kmax.

    Lambda_k = {j : lambda_(k-1) < 2^j <= lambda_k} with lambda_(-1) = 0.  Shells
    above lambda_kmax are folded into the last block so the list always sums
    to rho_in - mean.
    """
    if kmax < 0 or kmax >= len(schedule):
        raise ValueError("kmax out of range of the schedule")
    dec = lp_decompose(rho_in)
    N = dec.N
    if N / 2 < schedule[kmax] and kmax > 0:
        raise ValueError(f"grid N={N} does not resolve lambda_{kmax}={schedule[kmax]}")
    blocks = [np.zeros_like(dec.spectra[0]) for _ in range(kmax + 1)]
    for j, S in enumerate(dec.spectra):
        k = kmax
        for kk in range(kmax + 1):
            if 2 ** j <= schedule[kk]:
                k = kk
                break
        blocks[k] = blocks[k] + S
    return [GridField2D.from_hat(B, N, dec.t, f"datum_k{k}") for k, B in enumerate(blocks)]


def random_datum(N: int, alpha_prime: float, seed: int, nmax: Optional[int] = None,
                 normalize: bool = True) -> GridField2D:
    """Random-phase field with |rho_hat(n)| = |n|^-(2 + alpha') for 0 < |n_i| <= nmax.

    Phases come from a Philox counter-based generator keyed by ``seed``, so
    the field is the same on every platform.  Real-valuedness is imposed by
    drawing on the half spectrum.
    """
    sp = spectral(N)
    nmax = sp.kcut if nmax is None else int(nmax)
    rng = np.random.Generator(np.random.Philox(seed))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=sp.nsq.shape)
    keep = (np.abs(sp.n1) <= nmax) & (sp.n2 <= nmax) & (sp.nsq > 0)
    amp = np.where(keep, np.maximum(sp.nsq, 1.0) ** (-(2.0 + alpha_prime) / 2.0), 0.0)
    F = amp * np.exp(1j * phase) * N ** 2
    # the n2 = 0 column must be Hermitian in n1 for a real field
    col = F[:, 0].copy()
    n1 = np.rint(sp.n1[:, 0]).astype(int)
    for i, n in enumerate(n1):
        if 0 > n > -(N // 2):
            col[i] = np.conj(col[np.flatnonzero(n1 == -n)[0]])
    F[:, 0] = col
    F[0, 0] = 0.0
    vals = sp.ifft(F)
    if normalize:
        vals = vals / math.sqrt(float(np.mean(vals ** 2)))
    return GridField2D(vals, 0.0, f"datum[H^(1+{alpha_prime}), seed={seed}]")


def sobolev_norm(f, s: float) -> float:
    """Homogeneous H^s norm (sum |2 pi n|^(2s) |f_n|^2)^(1/2) of the mean-free part."""
    f = _as_field(f)
    sp = spectral(f.N)
    w = np.where(sp.nsq > 0, (4.0 * np.pi ** 2 * sp.nsq) ** s, 0.0)
    return math.sqrt(float(np.sum(sp.pw * w * np.abs(f.hat) ** 2)) / f.N ** 4)
