"""Periodic fields on the unit torus and the spectral operators acting on them.

Samples sit at x = (i/N, j/N) with ``values[..., i, j]``; the first grid axis
is x1.  Frequencies are integers n (the 2 pi factor lives in the operators),
so a mode exp(2 pi i n.x) has wavelength 1/|n|.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

__all__ = ["Spectral", "spectral", "GridField2D", "set_threads",
           "read_binary", "dealias_cutoff"]

_WORKERS = 1


def set_threads(k: int):
    """Number of threads handed to the FFT backend."""
    global _WORKERS
    _WORKERS = max(1, int(k))


def dealias_cutoff(N: int) -> int:
    """Largest kept |n_i| under the two-thirds rule (3 * cutoff < N)."""
    return (N - 1) // 3


class Spectral:
    """Wavenumber tables and transforms for an N x N grid.

    ``mask`` is the square two-thirds filter |n1|, |n2| <= (N-1)//3.  When both
    the scalar and the velocity are confined to it, grid sums of
    rho * (u . grad rho) are exact integrals of a divergence, so the discrete
    advection conserves the L2 norm.
    """

    def __init__(self, N: int):
        if N < 4 or (N & (N - 1)) != 0:
            raise ValueError(f"grid size must be a power of two, got {N}")
        self.N = N
        n1 = np.fft.fftfreq(N, d=1.0 / N)
        n2 = np.fft.rfftfreq(N, d=1.0 / N)
        self.n1 = n1[:, None]
        self.n2 = n2[None, :]
        # derivative symbols with the Nyquist mode removed (odd derivatives)
        d1 = 2j * np.pi * n1
        d1[N // 2] = 0.0
        d2 = 2j * np.pi * n2
        d2[-1] = 0.0
        self.d1 = d1[:, None]
        self.d2 = d2[None, :]
        self.nsq = self.n1 ** 2 + self.n2 ** 2
        self.lap = -4.0 * np.pi ** 2 * self.nsq
        kc = dealias_cutoff(N)
        self.kcut = kc
        self.mask = (np.abs(self.n1) <= kc) & (self.n2 <= kc)
        # modes with a Nyquist index: their odd derivatives are ill-defined
        self.nonyq = (self.n1 != -(N // 2)) & (self.n2 != N // 2)
        # Parseval weights for the half spectrum
        w = np.full(n2.shape, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        self.pw = w[None, :]
        self.nabs = np.sqrt(self.nsq)

    def fft(self, f):
        return sfft.rfft2(f, workers=_WORKERS)

    def ifft(self, F):
        return sfft.irfft2(F, s=(self.N, self.N), workers=_WORKERS)

    def grid(self):
        x = np.arange(self.N) / self.N
        return np.meshgrid(x, x, indexing="ij")

    def mean_sq(self, F):
        """Spatial mean of f^2 from the half spectrum of f (last two axes)."""
        return np.sum(self.pw * np.abs(F) ** 2, axis=(-2, -1)) / self.N ** 4

    def grad_sq(self, F):
        """Spatial mean of |grad f|^2 from the half spectrum."""
        return np.sum(self.pw * (4 * np.pi ** 2 * self.nsq) * np.abs(F) ** 2,
                      axis=(-2, -1)) / self.N ** 4

    def perp_grad(self, P):
        """Spectra of (d2 psi, -d1 psi) from the spectrum of psi."""
        return self.d2 * P, -self.d1 * P

    def gradient(self, F):
        return self.d1 * F, self.d2 * F


@lru_cache(maxsize=8)
def spectral(N: int) -> Spectral:
    return Spectral(N)


_MAGIC = b"HLF1"
_HEAD = struct.Struct("<4sqqd32s64s")


@dataclass
class GridField2D:
    """Real samples of a scalar (N, N) or vector (2, N, N) field.

    Parameters
    ----------
    values : ndarray
    t : float
        Time stamp.
    tag : str
        Free-form label (generation, quantity).
    """

    values: np.ndarray
    t: float = 0.0
    tag: str = ""
    _hat: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim not in (2, 3) or self.values.shape[-1] != self.values.shape[-2]:
            raise ValueError(f"expected (N,N) or (2,N,N) samples, got {self.values.shape}")

    @classmethod
    def from_hat(cls, F, N, t=0.0, tag=""):
        f = cls(spectral(N).ifft(F), t, tag)
        f._hat = F
        return f

    @property
    def N(self):
        return self.values.shape[-1]

    @property
    def is_vector(self):
        return self.values.ndim == 3

    @property
    def hat(self):
        if self._hat is None:
            self._hat = spectral(self.N).fft(self.values)
        return self._hat

    @property
    def mean(self):
        return self.hat[..., 0, 0].real / self.N ** 2

    def component(self, i):
        return GridField2D(self.values[i], self.t, f"{self.tag}[{i}]")

    def l2sq(self):
        """Spatial mean of |f|^2 (the torus has unit area)."""
        return float(np.sum(spectral(self.N).mean_sq(self.hat)))

    def sup(self):
        return float(np.max(np.abs(self.values)))

    def roundtrip_error(self):
        back = spectral(self.N).ifft(self.hat)
        return float(np.max(np.abs(back - self.values)) / max(self.sup(), 1e-300))

    def divergence_ratio(self):
        """max_n |n . u_hat(n)| / ||u_hat|| for a vector field."""
        if not self.is_vector:
            raise ValueError("divergence needs a vector field")
        sp = spectral(self.N)
        F = self.hat
        div = sp.n1 * F[0] + sp.n2 * F[1]
        norm = np.sqrt(np.sum(sp.pw * (np.abs(F[0]) ** 2 + np.abs(F[1]) ** 2)))
        if norm == 0.0:
            return 0.0
        return float(np.max(np.abs(div)) / norm)

    def to_binary(self, path, config_hash=""):
        """Flat binary: header (magic, N, ncomp, t, tag, hash) then row-major float64."""
        ncomp = 2 if self.is_vector else 1
        head = _HEAD.pack(_MAGIC, self.N, ncomp, float(self.t),
                          self.tag.encode()[:32], config_hash.encode()[:64])
        with open(path, "wb") as fh:
            fh.write(head)
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    def to_csv(self, path, header_lines=()):
        """Long-format CSV: i, j, x1, x2 and one column per component."""
        N = self.N
        x = np.arange(N) / N
        vals = self.values.reshape(-1, N, N)
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write(f"# N={N} t={self.t!r} tag={self.tag}\n")
            w = csv.writer(fh)
            w.writerow(["i", "j", "x1", "x2"] + [f"v{c}" for c in range(vals.shape[0])])
            for i in range(N):
                for j in range(N):
                    w.writerow([i, j, repr(x[i]), repr(x[j])]
                               + [repr(float(v[i, j])) for v in vals])


def read_binary(path):
    """Inverse of ``GridField2D.to_binary``; returns (field, config_hash)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, N, ncomp, t, tag, h = _HEAD.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise ValueError("not a field snapshot")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEAD.size)
    shape = (N, N) if ncomp == 1 else (ncomp, N, N)
    return (GridField2D(data.reshape(shape).copy(), t, tag.rstrip(b"\0").decode()),
            h.rstrip(b"\0").decode())
