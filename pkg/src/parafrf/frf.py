"""FRF estimation and conditioning: H1 averaging, Gaussian smoothing,
decimation, and the band-RMS load parameter."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _io
from .errors import DegenerateExcitationError, InvalidArgumentError
from .signals import Spectrum

DEFAULT_BAND_HZ = (3.0, 70.0)
DEFAULT_SIGMA_BINS = 8.0
KERNEL_HALF_WIDTH_SIGMAS = 4.0


@dataclass(frozen=True)
class LoadParameter:
    value_n_rms: float
    band_lo_hz: float = DEFAULT_BAND_HZ[0]
    band_hi_hz: float = DEFAULT_BAND_HZ[1]

    def __post_init__(self):
        if not self.band_lo_hz < self.band_hi_hz:
            raise InvalidArgumentError("band_lo_hz must be below band_hi_hz")
        if not self.value_n_rms >= 0:
            raise InvalidArgumentError("load parameter must be non-negative")


@dataclass(frozen=True, eq=False)
class FrfDataset:
    """FRF samples ``values[j, k] = H(2j*pi*freq_hz[j], params[k])``."""

    freq_hz: np.ndarray
    params: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.array(self.freq_hz, dtype=float, copy=True).ravel()
        p = np.array(self.params, dtype=float, copy=True).ravel()
        v = np.array(self.values, dtype=complex, copy=True)
        if v.ndim == 1:
            v = v[:, None]
        if p.size < 1 or f.size < 1:
            raise InvalidArgumentError("dataset needs at least one frequency and one parameter")
        if v.shape != (f.size, p.size):
            raise InvalidArgumentError(f"values shape {v.shape} != ({f.size}, {p.size})")
        if np.any(np.diff(p) <= 0):
            raise InvalidArgumentError("params must be strictly increasing")
        if np.any(np.diff(f) <= 0):
            raise InvalidArgumentError("freq_hz must be ascending")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(f)) and np.all(np.isfinite(p))):
            raise InvalidArgumentError("dataset contains NaN or Inf")
        for a in (f, p, v):
            a.setflags(write=False)
        object.__setattr__(self, "freq_hz", f)
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def shape(self):
        return self.values.shape

    @property
    def s(self) -> np.ndarray:
        return 2j * np.pi * self.freq_hz

    def column(self, k: int) -> Spectrum:
        return Spectrum(self.freq_hz, self.values[:, k])

    def digest(self) -> str:
        import hashlib
        h = hashlib.sha256()
        for a in (self.freq_hz, self.params, self.values):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()

    @classmethod
    def from_columns(cls, columns: Sequence[Spectrum], params, meta=None) -> "FrfDataset":
        f = columns[0].freq_hz
        for c in columns[1:]:
            if c.freq_hz.shape != f.shape or np.any(c.freq_hz != f):
                raise InvalidArgumentError("columns use different frequency grids")
        vals = np.column_stack([c.values for c in columns])
        return cls(f, params, vals, meta or {})


def _same_grid(a: Spectrum, b: Spectrum) -> bool:
    return a.freq_hz.shape == b.freq_hz.shape and np.allclose(a.freq_hz, b.freq_hz, rtol=1e-12, atol=0)


def h1_estimate(force_blocks: Sequence[Spectrum], vel_blocks: Sequence[Spectrum],
                return_coherence: bool = False):
    """H1 FRF estimate ``G_vf / G_ff`` from block spectra.

    Cross and auto spectra are arithmetic means over the blocks. With
    ``return_coherence`` the ordinary coherence is returned as well; it is a
    diagnostic only.
    """
    if len(force_blocks) < 1 or len(force_blocks) != len(vel_blocks):
        raise InvalidArgumentError("need the same non-zero number of force and velocity blocks")
    ref = force_blocks[0]
    for blk in list(force_blocks) + list(vel_blocks):
        if not _same_grid(ref, blk):
            raise InvalidArgumentError("all blocks must share one frequency grid")
    F = np.array([b.values for b in force_blocks])
    V = np.array([b.values for b in vel_blocks])
    g_vf = np.mean(V * F.conj(), axis=0)
    g_ff = np.mean((F * F.conj()).real, axis=0)
    bad = np.flatnonzero(g_ff <= 1e-28 * np.max(g_ff)) if np.max(g_ff) > 0 else np.arange(g_ff.size)
    if bad.size:
        raise DegenerateExcitationError(bad[0], ref.freq_hz[bad[0]])
    h = Spectrum(ref.freq_hz, g_vf / g_ff)
    if not return_coherence:
        return h
    g_vv = np.mean((V * V.conj()).real, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        coh = np.where(g_vv > 0, np.abs(g_vf) ** 2 / (g_ff * g_vv), 0.0)
    return h, coh


def gaussian_kernel(sigma_bins: float) -> np.ndarray:
    """Unnormalized Gaussian taps on ``-M..M``, ``M = floor(4*sigma)``."""
    half = int(math.floor(KERNEL_HALF_WIDTH_SIGMAS * sigma_bins))
    m = np.arange(-half, half + 1)
    return np.exp(-m ** 2 / (2.0 * sigma_bins ** 2))


def gaussian_smooth(values, sigma_bins: float = DEFAULT_SIGMA_BINS) -> np.ndarray:
    """Gaussian smoothing along the sequence.

    Near the ends the kernel is renormalized over the taps that fall inside
    the sequence, so there is no zero-padding bias. Real and imaginary parts
    are smoothed identically (the operation is linear with real weights).
    """
    if not (np.isfinite(sigma_bins) and sigma_bins > 0):
        raise InvalidArgumentError("sigma_bins must be positive")
    x = np.asarray(values)
    if x.size == 0:
        raise InvalidArgumentError("cannot smooth an empty sequence")
    w = gaussian_kernel(sigma_bins)
    return _centered_convolve(x, w) / _centered_convolve(np.ones(x.size), w)


def _centered_convolve(x, w):
    # crop of the full convolution; np.convolve(mode="same") misbehaves when len(w) > len(x)
    half = (w.size - 1) // 2
    return np.convolve(x, w, mode="full")[half:half + x.size]


def smooth_dataset(dataset: FrfDataset, sigma_bins: float = DEFAULT_SIGMA_BINS) -> FrfDataset:
    vals = np.column_stack([gaussian_smooth(dataset.values[:, k], sigma_bins)
                            for k in range(dataset.values.shape[1])])
    meta = dict(dataset.meta, smoothing_sigma_bins=float(sigma_bins))
    return FrfDataset(dataset.freq_hz, dataset.params, vals, meta)


def decimate(dataset: FrfDataset, factor: int) -> FrfDataset:
    """Keep every ``factor``-th frequency row, starting with the first.

    When ``factor`` does not divide the row count the last partial stride is
    kept as well, i.e. ``ceil(Ns/factor)`` rows survive.
    """
    if int(factor) != factor or factor < 1:
        raise InvalidArgumentError("decimation factor must be a positive integer")
    factor = int(factor)
    meta = dict(dataset.meta)
    meta["decimation_factor"] = meta.get("decimation_factor", 1) * factor
    return FrfDataset(dataset.freq_hz[::factor], dataset.params,
                      dataset.values[::factor, :], meta)


def band_rms(force_spec: Spectrum, band=DEFAULT_BAND_HZ) -> float:
    """RMS of the amplitude-corrected force spectrum over an inclusive band.

    ``band`` may be a ``(lo, hi)`` pair or a :class:`LoadParameter`.
    """
    if isinstance(band, LoadParameter):
        lo, hi = band.band_lo_hz, band.band_hi_hz
    else:
        lo, hi = band
    if not lo < hi:
        raise InvalidArgumentError("band must satisfy lo < hi")
    mask = (force_spec.freq_hz >= lo) & (force_spec.freq_hz <= hi)
    if not mask.any():
        raise InvalidArgumentError(f"no frequency bins inside [{lo}, {hi}] Hz")
    amp = force_spec.amplitude()[mask]
    return float(np.sqrt(np.mean(amp ** 2)))


def write_dataset(path_csv, dataset: FrfDataset, band=DEFAULT_BAND_HZ,
                  provenance: dict | None = None) -> None:
    """CSV ``freq_hz,param_n_rms,re,im`` (frequency outer, parameter inner)
    plus a ``.json`` sidecar holding meta and the load band."""
    from pathlib import Path
    path_csv = Path(path_csv)
    lines = [_io.comment_line(provenance), "freq_hz,param_n_rms,re,im\n"]
    P = dataset.params
    for j, f in enumerate(dataset.freq_hz):
        fs = _io.fmt(f)
        row = dataset.values[j]
        for k in range(P.size):
            lines.append(f"{fs},{_io.fmt(P[k])},{_io.fmt(row[k].real)},{_io.fmt(row[k].imag)}\n")
    _io.atomic_write_text(path_csv, "".join(lines))
    sidecar = {
        "meta": dataset.meta,
        "band_hz": [float(band[0]), float(band[1])],
        "n_freq": int(dataset.freq_hz.size),
        "n_params": int(P.size),
        "digest": dataset.digest(),
    }
    if provenance:
        sidecar["provenance"] = provenance
    _io.atomic_write_json(path_csv.with_suffix(".json"), sidecar)


def read_dataset(path_csv) -> FrfDataset:
    import json
    from pathlib import Path
    path_csv = Path(path_csv)
    header, rows = _io.read_csv_rows(path_csv)
    if header != ["freq_hz", "param_n_rms", "re", "im"]:
        raise InvalidArgumentError(f"{path_csv}: unexpected header {header}")
    data = np.array(rows, dtype=float)
    params = np.unique(data[:, 1])
    npar = params.size
    if data.shape[0] % npar:
        raise InvalidArgumentError(f"{path_csv}: incomplete frequency x parameter grid")
    data = data.reshape(-1, npar, 4)
    meta = {}
    side = path_csv.with_suffix(".json")
    if side.exists():
        meta = json.loads(side.read_text()).get("meta", {})
    return FrfDataset(data[:, 0, 0], data[0, :, 1], data[:, :, 2] + 1j * data[:, :, 3], meta)
