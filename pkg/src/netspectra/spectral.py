"""Cross-power spectral density estimation at a single frequency.

The reconstruction algorithms need the output CPSD matrix at one frequency
only, so the estimator computes exactly that: each channel's windowed segment
transforms are evaluated at a single FFT bin (one pass per channel, shared
read-only across all channel pairs) and averaged Welch-style into an exactly
Hermitian matrix.  Requested frequencies are snapped to the segment grid
``2 pi k / (segment_length * dt)`` so that estimates and analytic references
are always compared at the same frequency.

A lag-domain path (:func:`estimate_cpsd_lag_domain`) computes the same
quantity through explicit full-lag cross-correlations followed by a
single-frequency transform.  It is mathematically the single cross-periodogram
(no averaging, high variance) and exists for cost-model benchmarking where the
quadratic-in-length correlation stage is the object of study.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.signal import get_window

from .errors import NumericalError, ValidationError
from .lti import CpsdMatrix, InputPsdModel, NodeDynamics, nodal_transfer
from .simulate import TimeSeriesMatrix

__all__ = [
    "SpectralConfig",
    "CpsdInverse",
    "estimate_cpsd_matrix",
    "estimate_cpsd_lag_domain",
    "estimate_psd_grid",
    "estimate_cpsd_grid",
    "estimate_inverse_cpsd",
    "select_omega0",
]

#: Minimum |h(jw)| for a frequency to be admissible in automatic selection.
H_ADMISSIBLE_TOL = 1e-6

#: Diagonal loading factor applied to indefinite estimated CPSD matrices.
LOADING_EPS = 1e-10


@dataclass(frozen=True)
class SpectralConfig:
    """Averaged-periodogram estimator parameters.

    ``overlap_fraction=0`` with the rectangular window reproduces plain
    non-overlapping segment averaging; the default (hann, 50% overlap) has
    lower variance at equal record length.
    """

    segment_length: int = 4096
    overlap_fraction: float = 0.5
    window: str = "hann"
    detrend: str = "mean"

    def __post_init__(self):
        s = self.segment_length
        if s < 2 or (s & (s - 1)) != 0:
            raise ValidationError(f"segment_length must be a power of two, got {s}")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValidationError("overlap_fraction must lie in [0, 1)")
        if self.window not in ("hann", "rectangular"):
            raise ValidationError(f"unknown window {self.window!r}")
        if self.detrend not in ("mean", "none"):
            raise ValidationError(f"unknown detrend {self.detrend!r}")

    @property
    def step(self) -> int:
        return max(1, int(round(self.segment_length * (1.0 - self.overlap_fraction))))

    def window_values(self) -> np.ndarray:
        if self.window == "rectangular":
            return np.ones(self.segment_length)
        return get_window("hann", self.segment_length)

    def n_segments(self, n_samples: int) -> int:
        return (n_samples - self.segment_length) // self.step + 1


def _segments(x: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
    """(K, segment_length) strided view of one channel."""
    view = np.lib.stride_tricks.sliding_window_view(x, cfg.segment_length)
    return view[:: cfg.step]


def _check_record(ts: TimeSeriesMatrix, cfg: SpectralConfig) -> int:
    if ts.n_samples < 2 * cfg.segment_length:
        raise ValidationError(
            f"record of {ts.n_samples} samples is shorter than twice the "
            f"segment length {cfg.segment_length}"
        )
    k = cfg.n_segments(ts.n_samples)
    if k < 8:
        warnings.warn(f"only {k} segments averaged; estimates will be noisy")
    return k


def snap_frequency(omega0: float, ts_dt: float, cfg: SpectralConfig) -> tuple[float, int]:
    """Snap to the nearest admissible bin ``2 pi k / (segment_length * dt)``.

    Returns ``(snapped_omega, bin_index)``.  DC and the Nyquist bin are not
    admissible (detrending removes DC; Nyquist carries no phase information).
    """
    nyquist = np.pi / ts_dt
    if abs(omega0) >= nyquist:
        raise ValidationError(
            f"omega0={omega0:.6g} is at or above the Nyquist rate {nyquist:.6g}"
        )
    spacing = 2 * np.pi / (cfg.segment_length * ts_dt)
    k = int(round(abs(omega0) / spacing))
    k = min(k, cfg.segment_length // 2 - 1)
    if k == 0:
        raise NumericalError(
            f"omega0={omega0:.6g} snaps to the DC bin; increase the segment "
            "length or choose a larger frequency"
        )
    return k * spacing, k


def _bin_transforms(ts: TimeSeriesMatrix, k: int, cfg: SpectralConfig) -> tuple[np.ndarray, int]:
    """Windowed segment transforms of every channel at bin ``k``: shape (K, N)."""
    n_seg = _check_record(ts, cfg)
    win = cfg.window_values()
    phase = win * np.exp(
        -2j * np.pi * k * np.arange(cfg.segment_length) / cfg.segment_length
    )
    out = np.empty((n_seg, ts.n_channels), dtype=complex)
    for ch in range(ts.n_channels):
        segs = _segments(ts.data[ch], cfg)
        if cfg.detrend == "mean":
            out[:, ch] = segs @ phase - segs.mean(axis=1) * phase.sum()
        else:
            out[:, ch] = segs @ phase
    return out, n_seg


def estimate_cpsd_matrix(
    ts: TimeSeriesMatrix, omega0: float, cfg: SpectralConfig
) -> CpsdMatrix:
    """Welch-averaged CPSD matrix at the bin nearest ``omega0``.

    The result is exactly Hermitian with a real nonnegative diagonal, carries
    the averaged segment count ``K`` and the standard-error scale
    ``||S||_F / sqrt(K)``, and records how far the requested frequency was
    snapped.  Density convention: two-sided, per angular frequency, i.e.
    directly comparable with :func:`netspectra.lti.analytic_cpsd`.
    """
    snapped, k = snap_frequency(omega0, ts.dt, cfg)
    x, n_seg = _bin_transforms(ts, k, cfg)
    win = cfg.window_values()
    scale = ts.dt / (n_seg * (win * win).sum())
    s = scale * (x.T @ x.conj())
    s = 0.5 * (s + s.conj().T)
    s[np.diag_indices_from(s)] = np.maximum(np.diag(s).real, 0.0)
    return CpsdMatrix(
        values=s,
        omega=snapped,
        source="estimated",
        segment_count=n_seg,
        stderr=float(np.linalg.norm(s) / np.sqrt(n_seg)),
        snap_distance=float(abs(snapped - abs(omega0))),
    )


#: Tile size for the lag-domain correlation; keeps every partial correlation
#: cache-resident so the quadratic cost has a length-independent constant.
_CORR_BLOCK = 2048


def _full_correlate(x: np.ndarray, y: np.ndarray, block: int = _CORR_BLOCK) -> np.ndarray:
    """All-lags cross-correlation sum_n x[n + m] y[n], m = -(L-1)..(L-1).

    Tiled into block-pair partial correlations; bitwise layout matches
    ``np.correlate(x, y, mode="full")`` up to summation order.
    """
    l = x.size
    if l <= block:
        return np.correlate(x, y, mode="full")
    n_blocks = -(-l // block)
    lp = n_blocks * block
    xp = np.zeros(lp)
    xp[:l] = x
    yp = np.zeros(lp)
    yp[:l] = y
    out = np.zeros(2 * lp - 1)
    for a in range(n_blocks):
        xa = xp[a * block : (a + 1) * block]
        for b in range(n_blocks):
            yb = yp[b * block : (b + 1) * block]
            c = np.correlate(xa, yb, mode="full")
            center = lp - 1 + (a - b) * block
            out[center - (block - 1) : center + block] += c
    return out[(lp - 1) - (l - 1) : (lp - 1) + l]


def estimate_cpsd_lag_domain(ts: TimeSeriesMatrix, omega0: float) -> CpsdMatrix:
    """CPSD matrix via explicit full-lag cross-correlations (cost-model path).

    Computes the biased cross-correlation of every channel pair over all
    ``2L-1`` lags (quadratic in the record length) and transforms it at the
    single frequency ``omega0``.  Equivalent to the un-averaged cross
    periodogram; meant for benchmarking, not precision estimation.
    """
    n, l = ts.n_channels, ts.n_samples
    nyquist = np.pi / ts.dt
    if abs(omega0) >= nyquist:
        raise ValidationError(
            f"omega0={omega0:.6g} is at or above the Nyquist rate {nyquist:.6g}"
        )
    data = ts.data - ts.data.mean(axis=1, keepdims=True)
    lags = np.arange(-(l - 1), l)
    phase = np.exp(-1j * omega0 * lags * ts.dt)
    s = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(i, n):
            # biased estimate: entry m' holds sum_n x_i[n + lags[m']] x_j[n]
            r = _full_correlate(data[i], data[j]) / l
            val = ts.dt * (r @ phase)
            s[i, j] = val
            s[j, i] = np.conj(val)
    s[np.diag_indices_from(s)] = np.maximum(np.diag(s).real, 0.0)
    return CpsdMatrix(
        values=s,
        omega=float(abs(omega0)),
        source="estimated",
        segment_count=1,
        stderr=float(np.linalg.norm(s)),
    )


def estimate_psd_grid(
    ts: TimeSeriesMatrix, cfg: SpectralConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel Welch PSD over the whole segment grid (diagnostic).

    Returns ``(omegas, psd)`` with ``psd[ch, f]`` two-sided density values on
    the nonnegative half-grid ``omegas = 2 pi k / (segment_length * dt)``.
    """
    n_seg = _check_record(ts, cfg)
    win = cfg.window_values()
    scale = ts.dt / (n_seg * (win * win).sum())
    psd = np.empty((ts.n_channels, cfg.segment_length // 2 + 1))
    for ch in range(ts.n_channels):
        segs = _segments(ts.data[ch], cfg)
        if cfg.detrend == "mean":
            segs = segs - segs.mean(axis=1, keepdims=True)
        spec = np.fft.rfft(segs * win, axis=1)
        psd[ch] = scale * (spec.real**2 + spec.imag**2).sum(axis=0)
    omegas = 2 * np.pi * np.fft.rfftfreq(cfg.segment_length, ts.dt)
    return omegas, psd


def estimate_cpsd_grid(
    ts: TimeSeriesMatrix, cfg: SpectralConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Full-grid CPSD matrices (diagnostic only; the pipeline needs one bin).

    Returns ``(omegas, s)`` with ``s[f]`` the Hermitian matrix at
    ``omegas[f]``.
    """
    n_seg = _check_record(ts, cfg)
    win = cfg.window_values()
    scale = ts.dt / (n_seg * (win * win).sum())
    specs = []
    for ch in range(ts.n_channels):
        segs = _segments(ts.data[ch], cfg)
        if cfg.detrend == "mean":
            segs = segs - segs.mean(axis=1, keepdims=True)
        specs.append(np.fft.rfft(segs * win, axis=1))
    specs = np.stack(specs, axis=2)  # (K, F, N)
    s = scale * np.einsum("kfi,kfj->fij", specs, specs.conj())
    s = 0.5 * (s + np.conj(np.swapaxes(s, 1, 2)))
    omegas = 2 * np.pi * np.fft.rfftfreq(cfg.segment_length, ts.dt)
    return omegas, s


@dataclass(frozen=True)
class CpsdInverse:
    """Inverse CPSD matrix with its conditioning report.

    ``loaded`` records whether diagonal loading was needed to restore positive
    definiteness of an estimated matrix (it never fires on analytic inputs).
    """

    values: np.ndarray
    condition_number: float
    min_eigenvalue: float
    loaded: bool


def estimate_inverse_cpsd(s: CpsdMatrix) -> CpsdInverse:
    """Invert a Hermitian CPSD matrix, reporting conditioning.

    Estimated matrices that fail positive definiteness receive one round of
    diagonal loading ``eps * trace / N`` (eps = 1e-10); analytic matrices must
    be positive definite as given.  The inverse is assembled from the
    eigendecomposition, so it is exactly Hermitian.
    """
    v = s.values
    lam = np.linalg.eigvalsh(v)
    loaded = False
    if lam[0] <= 0.0:
        if s.source == "estimated":
            shift = LOADING_EPS * np.trace(v).real / s.n_nodes
            v = v + shift * np.eye(s.n_nodes)
            lam = np.linalg.eigvalsh(v)
            loaded = True
        if lam[0] <= 0.0:
            raise NumericalError(
                f"CPSD matrix at omega={s.omega:.6g} is singular or indefinite "
                f"(min eigenvalue {lam[0]:.3e})"
                + ("" if loaded else "; analytic input should be positive definite")
            )
    inv = np.linalg.inv(v)
    inv = 0.5 * (inv + inv.conj().T)
    return CpsdInverse(
        values=inv,
        condition_number=float(lam[-1] / lam[0]),
        min_eigenvalue=float(lam[0]),
        loaded=loaded,
    )


def select_omega0(
    ts: TimeSeriesMatrix,
    noise_band: Union[tuple[float, float], InputPsdModel, float],
    cfg: SpectralConfig,
    node: Optional[NodeDynamics] = None,
) -> float:
    """Pick a reconstruction frequency on the estimator's bin grid.

    Any frequency inside the excitation band is theoretically valid; this
    policy maximises the worst-channel estimated PSD (best signal floor)
    over the bins in ``(0, Omega)``, skipping bins where the nodal transfer
    function is within ``1e-6`` of a transmission zero.  Deterministic given
    the inputs; ties resolve to the lowest frequency.
    """
    if isinstance(noise_band, InputPsdModel):
        omega_max = noise_band.omega_max
    elif isinstance(noise_band, (int, float)):
        omega_max = float(noise_band)
    else:
        omega_max = float(noise_band[1])
    if omega_max <= 0:
        raise ValidationError("noise band upper edge must be positive")
    omegas, psd = estimate_psd_grid(ts, cfg)
    admissible = (omegas > 0) & (omegas < omega_max) & (omegas < np.pi / ts.dt)
    if node is not None:
        hvals = np.array([abs(nodal_transfer(node, w)) for w in omegas])
        admissible &= hvals >= H_ADMISSIBLE_TOL
    if not admissible.any():
        raise NumericalError(
            f"no admissible frequency bin in (0, {omega_max:.6g}); "
            "increase the segment length or widen the band"
        )
    floor = psd.min(axis=0)
    score = np.where(admissible, floor, -np.inf)
    return float(omegas[int(np.argmax(score))])
