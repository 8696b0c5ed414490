"""Gaussian synthesis from spectral measures and the inverse estimators.

Synthesis draws one independent circular complex Gaussian vector per spectral
line and sums phasors::

    x_t = sum_k exp(2*pi*i*nu_k*t) B_k^(1/2) xi_k            (atoms)
        + sum_j exp(2*pi*i*f_j*t) (S(f_j)*dnu)^(1/2) xi_j    (density, FFT grid)

where ``f_j`` runs over the n-point FFT frequencies with spacing
``dnu = 1/(n*dt)`` and ``S(f_j)`` is the density value of the bin containing
``f_j``. Then ``E[x_{t+tau} x_t^H]`` is the Bochner transform of the measure
(the density part as its Riemann sum on the FFT grid).

Randomness is counter-based and fully reproducible: stream ``k`` is
``Philox(key=seed, counter=k * 2**128)``. Streams ``0 .. n_atoms-1`` belong
to the atoms in measure order; stream ``n_atoms + j`` belongs to FFT bin
``j`` (numpy FFT index order). Each consumed stream draws ``2*dim`` standard
normals: real parts first, then imaginary parts, scaled by ``1/sqrt(2)``.
Streams of bins outside the density support are never consumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AliasingError, DimensionMismatchError
from .linalg import hermitize, psd_sqrt
from .measure import CovarianceTable, DensityGrid, OperatorSpectralMeasure, nearest_psd

__all__ = ["Trajectory", "synthesize", "lag_covariance", "welch_estimate"]

_BAND_EDGE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled complex vector time series.

    ``samples[t]`` is the dim-vector at time ``t*dt``. ``seed`` is provenance
    metadata only; it does not survive file round trips.
    """

    dt: float
    samples: np.ndarray  # (n, dim) complex128
    seed: int | None = None

    def __post_init__(self):
        s = np.ascontiguousarray(self.samples, dtype=np.complex128).copy()
        if s.ndim != 2:
            raise DimensionMismatchError(
                f"samples must have shape (n, dim), got {s.shape}"
            )
        if not np.isfinite(s.view(np.float64)).all():
            raise ValueError("trajectory samples must be finite")
        dt = float(self.dt)
        if not (np.isfinite(dt) and dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        s.setflags(write=False)
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Trajectory)
            and self.dt == other.dt
            and self.samples.shape == other.samples.shape
            and bool(np.array_equal(self.samples, other.samples))
        )

    def __repr__(self) -> str:
        return f"Trajectory(dt={self.dt}, n={self.n}, dim={self.dim}, seed={self.seed})"


def _substream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=index * (1 << 128)))


def _complex_normal(rng: np.random.Generator, dim: int) -> np.ndarray:
    z = rng.standard_normal(2 * dim)
    return (z[:dim] + 1j * z[dim:]) / np.sqrt(2.0)


def synthesize(
    mu: OperatorSpectralMeasure, dt: float, n: int, seed: int
) -> Trajectory:
    """Draw one stationary Gaussian trajectory targeting the measure.

    ``n`` must be a power of two; every atom must lie strictly inside the
    representable band ``|nu| < 1/(2*dt)``, and a density may extend to the
    closed band edge (the exact full-band flat measure is representable).
    """
    dt = float(dt)
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    n = int(n)
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"n must be a power of two, got {n}")
    nyquist = 1.0 / (2.0 * dt)
    for nu_k, _ in mu.atoms:
        if not abs(nu_k) < nyquist:
            raise AliasingError(
                f"atom at nu={nu_k} outside the open band (-{nyquist}, {nyquist})"
            )
    den = mu.density
    if den is not None:
        edge = nyquist * (1.0 + _BAND_EDGE_RTOL)
        if den.nu_min < -edge or den.nu_max > edge:
            raise AliasingError(
                f"density band [{den.nu_min}, {den.nu_max}] exceeds the "
                f"representable band [-{nyquist}, {nyquist}]"
            )
    d = mu.dim
    times = np.arange(n) * dt
    x = np.zeros((n, d), dtype=np.complex128)
    for k, (nu_k, w) in enumerate(mu.atoms):
        xi = _complex_normal(_substream(seed, k), d)
        amp = psd_sqrt(w) @ xi
        x += np.exp(2j * np.pi * nu_k * times)[:, None] * amp[None, :]
    if den is not None:
        freqs = np.fft.fftfreq(n, d=dt)
        dnu = 1.0 / (n * dt)
        roots: dict[int, np.ndarray] = {}
        coeff = np.zeros((n, d), dtype=np.complex128)
        offset = len(mu.atoms)
        for j in range(n):
            b = den.bin_index(freqs[j])
            if b is None:
                continue
            root = roots.get(b)
            if root is None:
                root = psd_sqrt(den.values[b])
                roots[b] = root
            xi = _complex_normal(_substream(seed, offset + j), d)
            coeff[j] = np.sqrt(dnu) * (root @ xi)
        x += n * np.fft.ifft(coeff, axis=0)
    return Trajectory(dt=dt, samples=x, seed=int(seed))


def lag_covariance(traj: Trajectory, lags: int) -> CovarianceTable:
    """Unbiased lag-product estimate ``C(m*dt) ~ mean_t x_{t+m} x_t^H``.

    Each lag ``m`` averages over its ``n - m`` available products (unbiased
    for the mean-zero processes produced here). The zero lag is hermitized.
    """
    lags = int(lags)
    n = traj.n
    if lags < 0 or 2 * lags >= n:
        raise ValueError(f"lags must satisfy 0 <= lags < n/2, got {lags} with n={n}")
    x = traj.samples
    vals = np.empty((lags + 1, traj.dim, traj.dim), dtype=np.complex128)
    for m in range(lags + 1):
        lead = x[m:] if m else x
        lagged = x[: n - m] if m else x
        vals[m] = np.einsum("ti,tj->ij", lead, lagged.conj()) / (n - m)
    vals[0] = hermitize(vals[0])
    return CovarianceTable(dt=traj.dt, values=vals)


_TAPERS = ("hann", "bartlett", "boxcar")


def _taper(name: str, length: int) -> np.ndarray:
    t = np.arange(length)
    if name == "hann":
        return 0.5 * (1.0 - np.cos(2.0 * np.pi * t / length))
    if name == "bartlett":
        return 1.0 - np.abs(2.0 * t / length - 1.0)
    if name == "boxcar":
        return np.ones(length)
    raise ValueError(f"unknown taper {name!r}; choose from {_TAPERS}")


def welch_estimate(
    traj: Trajectory,
    segment: int,
    overlap: float = 0.5,
    taper: str = "hann",
) -> OperatorSpectralMeasure:
    """Averaged tapered-segment cross-periodogram as a density measure.

    Splits the trajectory into ``segment``-long pieces advancing by
    ``segment*(1-overlap)`` samples, tapers each, and averages

        dt * (X_f X_f^H) / sum_t w_t^2

    over segments, where ``X`` is the segment DFT. The result is a
    density-only measure with ``segment`` bins covering one Nyquist band;
    bin ``i`` has its left edge at the DFT frequency it estimates. Each bin
    is projected to the nearest PSD matrix (the average of outer products is
    already PSD, so this only clears rounding dust).
    """
    segment = int(segment)
    n = traj.n
    if segment < 2 or segment > n:
        raise ValueError(f"segment must be in [2, n], got {segment} with n={n}")
    if segment % 2 != 0:
        raise ValueError(f"segment must be even, got {segment}")
    overlap = float(overlap)
    if not (0.0 <= overlap <= 0.9):
        raise ValueError(f"overlap must be in [0, 0.9], got {overlap}")
    w = _taper(taper, segment)
    hop = max(1, int(round(segment * (1.0 - overlap))))
    count = 1 + (n - segment) // hop
    if count < 2:
        raise ValueError(
            f"need at least 2 segments, got {count} (n={n}, segment={segment})"
        )
    starts = np.arange(count) * hop
    idx = starts[:, None] + np.arange(segment)[None, :]
    segs = traj.samples[idx]  # (count, segment, dim)
    spectra = np.fft.fft(w[None, :, None] * segs, axis=1)
    acc = np.einsum("ksi,ksj->sij", spectra, spectra.conj()) / count
    acc *= traj.dt / float(np.sum(w * w))
    acc = np.fft.fftshift(acc, axes=0)
    vals = np.stack([nearest_psd(acc[i]) for i in range(segment)])
    nyquist = 1.0 / (2.0 * traj.dt)
    density = DensityGrid(nu_min=-nyquist, nu_max=nyquist, values=vals)
    return OperatorSpectralMeasure(dim=traj.dim, atoms=(), density=density)
