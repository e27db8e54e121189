"""Excitation waveforms and the one-sided DFT convention used throughout.

The forward transform is unnormalized, ``X[k] = sum_n x[n] exp(-2j*pi*k*n/N)``,
and only the non-negative frequency bins ``k = 0..N//2`` are stored.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _io
from .errors import InvalidArgumentError, NumericalInconsistencyError

# Relative imaginary residue tolerated by ifft_real before it refuses the input.
IMAG_RESIDUE_TOL = 1e-8


class WaveShape(str, enum.Enum):
    PERIODIC_CHIRP = "periodic_chirp"
    SINE = "sine"
    TRIANGLE = "triangle"
    SQUARE = "square"


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled real signal."""

    sample_rate_hz: float
    samples: np.ndarray
    start_time_s: float = 0.0

    def __post_init__(self):
        x = np.array(self.samples, dtype=float, copy=True).ravel()
        if not self.sample_rate_hz > 0:
            raise InvalidArgumentError("sample_rate_hz must be positive")
        if x.size == 0:
            raise InvalidArgumentError("a TimeSeries needs at least one sample")
        if not np.all(np.isfinite(x)):
            raise InvalidArgumentError("samples must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "start_time_s", float(self.start_time_s))

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    @property
    def time_s(self) -> np.ndarray:
        return self.start_time_s + np.arange(self.samples.size) / self.sample_rate_hz

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples ** 2)))

    def with_samples(self, samples) -> "TimeSeries":
        return TimeSeries(self.sample_rate_hz, samples, self.start_time_s)

    def blocks(self, block_size: int) -> list["TimeSeries"]:
        """Split into equal, non-overlapping blocks (a trailing remainder is dropped)."""
        if block_size < 2 or block_size > len(self):
            raise InvalidArgumentError(f"block size {block_size} incompatible with {len(self)} samples")
        n = len(self) // block_size
        return [
            TimeSeries(self.sample_rate_hz, self.samples[i * block_size:(i + 1) * block_size],
                       self.start_time_s + i * block_size / self.sample_rate_hz)
            for i in range(n)
        ]


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Complex values on a uniform, increasing frequency grid.

    Spectra produced by :func:`fft_spectrum` start at 0 Hz and remember the
    length of the transformed record in ``n_samples``; band selections and
    FRF slices may start at any grid point and carry ``n_samples=None``.
    """

    freq_hz: np.ndarray
    values: np.ndarray
    n_samples: int | None = None
    df_hz: float = field(init=False)

    def __post_init__(self):
        f = np.array(self.freq_hz, dtype=float, copy=True).ravel()
        v = np.array(self.values, dtype=complex, copy=True).ravel()
        if f.size == 0:
            raise InvalidArgumentError("empty spectrum")
        if f.size != v.size:
            raise InvalidArgumentError("freq_hz and values differ in length")
        if f.size > 1:
            d = np.diff(f)
            if np.any(d <= 0):
                raise InvalidArgumentError("frequency grid must be strictly increasing")
            df = (f[-1] - f[0]) / (f.size - 1)
            if np.max(np.abs(d - df)) > 1e-9 * df:
                raise InvalidArgumentError("frequency grid is not uniform")
        else:
            df = 0.0
        f.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "freq_hz", f)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "df_hz", float(df))

    def __len__(self):
        return self.values.size

    def select(self, lo_hz: float, hi_hz: float) -> "Spectrum":
        """Bins with ``lo_hz <= f <= hi_hz``."""
        mask = (self.freq_hz >= lo_hz) & (self.freq_hz <= hi_hz)
        if not mask.any():
            raise InvalidArgumentError(f"no bins in [{lo_hz}, {hi_hz}] Hz")
        return Spectrum(self.freq_hz[mask], self.values[mask])

    def amplitude(self) -> np.ndarray:
        """Physical (single-sided peak) amplitude of each bin.

        Needs ``n_samples``: DC and Nyquist bins scale by 1/N, all others by 2/N.
        Spectra without ``n_samples`` are taken to hold amplitudes already.
        """
        mag = np.abs(self.values)
        if self.n_samples is None:
            return mag
        n = self.n_samples
        scale = np.full(mag.size, 2.0 / n)
        k = np.rint(self.freq_hz / self.df_hz).astype(int) if self.df_hz > 0 else np.zeros(1, int)
        scale[k == 0] = 1.0 / n
        if n % 2 == 0:
            scale[k == n // 2] = 1.0 / n
        return mag * scale


def _check_positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise InvalidArgumentError(f"{name} must be positive, got {value!r}")


def _n_samples(duration_s, sample_rate_hz):
    n = int(round(duration_s * sample_rate_hz))
    if n < 2:
        raise InvalidArgumentError("duration too short for the sample rate")
    return n


def gen_chirp(f0_hz, f1_hz, duration_s, sample_rate_hz, target_rms, band_cap_hz=None) -> TimeSeries:
    """Linear-frequency periodic chirp sweeping ``f0 -> f1`` over the window.

    Phase is ``2*pi*(f0*t + (f1 - f0)*t**2/(2*T))``, zero at ``t = 0``. The
    sample mean is removed before RMS scaling so the signal carries no DC
    component (a mobility cannot transmit one). If ``band_cap_hz`` is given the
    sweep stops at ``min(f1, band_cap_hz)``.
    """
    _check_positive("duration_s", duration_s)
    _check_positive("sample_rate_hz", sample_rate_hz)
    _check_positive("target_rms", target_rms)
    if not (0 < f0_hz <= f1_hz):
        raise InvalidArgumentError("need 0 < f0_hz <= f1_hz")
    f_top = f1_hz if band_cap_hz is None else min(f1_hz, band_cap_hz)
    if f_top < f0_hz:
        raise InvalidArgumentError("band cap below the start frequency")
    if not sample_rate_hz > 2 * f_top:
        raise InvalidArgumentError(
            f"sweep end {f_top} Hz is above Nyquist ({sample_rate_hz / 2} Hz)")
    n = _n_samples(duration_s, sample_rate_hz)
    t = np.arange(n) / sample_rate_hz
    T = n / sample_rate_hz
    phase = 2 * np.pi * (f0_hz * t + (f_top - f0_hz) * t ** 2 / (2 * T))
    x = np.sin(phase)
    x -= x.mean()
    x *= target_rms / np.sqrt(np.mean(x ** 2))
    return TimeSeries(sample_rate_hz, x)


def gen_periodic(shape, freq_hz, duration_s, sample_rate_hz, target_rms) -> TimeSeries:
    """Zero-mean sine, triangle or square wave with analytic amplitude.

    Peak amplitudes are ``rms*sqrt(2)`` (sine), ``rms*sqrt(3)`` (triangle)
    and ``rms`` (square). The square wave is ``+A`` on the first half of each
    cycle, so a sample exactly on a rising crossing reads ``+A`` and one on a
    falling crossing reads ``-A``.
    """
    shape = WaveShape(shape)
    if shape is WaveShape.PERIODIC_CHIRP:
        raise InvalidArgumentError("use gen_chirp for chirp signals")
    _check_positive("duration_s", duration_s)
    _check_positive("sample_rate_hz", sample_rate_hz)
    _check_positive("target_rms", target_rms)
    if not (0 < freq_hz < sample_rate_hz / 2):
        raise InvalidArgumentError(f"frequency {freq_hz} Hz outside (0, Nyquist)")
    n = _n_samples(duration_s, sample_rate_hz)
    # cycles elapsed, reduced mod 1; exact when freq/rate is dyadic
    cyc = np.mod(freq_hz * np.arange(n) / sample_rate_hz, 1.0)
    if shape is WaveShape.SINE:
        x = target_rms * np.sqrt(2) * np.sin(2 * np.pi * cyc)
    elif shape is WaveShape.TRIANGLE:
        # 0 at cyc=0, +A at 1/4, 0 at 1/2, -A at 3/4
        tri = np.where(cyc < 0.25, 4 * cyc,
                       np.where(cyc < 0.75, 2 - 4 * cyc, 4 * cyc - 4))
        x = target_rms * np.sqrt(3) * tri
    else:
        x = np.where(cyc < 0.5, target_rms, -target_rms)
    return TimeSeries(sample_rate_hz, x)


def fft_spectrum(ts: TimeSeries) -> Spectrum:
    """One-sided, unnormalized DFT of a real series."""
    n = len(ts)
    if n < 2:
        raise InvalidArgumentError("fft_spectrum needs at least two samples")
    values = np.fft.rfft(ts.samples)
    freq = np.arange(values.size) * ts.sample_rate_hz / n
    return Spectrum(freq, values, n_samples=n)


def ifft_real(spec: Spectrum, n_samples: int, sample_rate_hz: float) -> TimeSeries:
    """Inverse of :func:`fft_spectrum`.

    The full spectrum is rebuilt with Hermitian symmetry, so the only possible
    imaginary output comes from non-real DC/Nyquist bins; more than
    ``IMAG_RESIDUE_TOL`` of it (relative) raises.
    """
    n_samples = int(n_samples)
    if n_samples < 2 or len(spec) != n_samples // 2 + 1:
        raise InvalidArgumentError(
            f"spectrum has {len(spec)} bins, expected {n_samples // 2 + 1} for N={n_samples}")
    X = spec.values
    full = np.empty(n_samples, dtype=complex)
    full[:X.size] = X
    tail = X[1:(n_samples + 1) // 2]
    full[X.size:] = np.conj(tail[::-1])
    x = np.fft.ifft(full)
    norm = np.linalg.norm(x)
    if norm > 0 and np.linalg.norm(x.imag) > IMAG_RESIDUE_TOL * norm:
        raise NumericalInconsistencyError(
            "inverse transform has a significant imaginary part "
            f"({np.linalg.norm(x.imag) / norm:.2e} relative)")
    return TimeSeries(sample_rate_hz, x.real)


def write_timeseries_csv(path, ts: TimeSeries, provenance: dict | None = None) -> None:
    lines = [_io.comment_line(provenance), "time_s,value\n"]
    t = ts.time_s
    lines.extend(f"{_io.fmt(a)},{_io.fmt(b)}\n" for a, b in zip(t, ts.samples))
    _io.atomic_write_text(path, "".join(lines))


def read_timeseries_csv(path) -> TimeSeries:
    header, rows = _io.read_csv_rows(path)
    if header != ["time_s", "value"]:
        raise InvalidArgumentError(f"{path}: expected header time_s,value")
    data = np.array(rows, dtype=float)
    if data.shape[0] < 2:
        raise InvalidArgumentError(f"{path}: need at least two samples")
    t = data[:, 0]
    # rate is recovered from the time column; 12 digits absorbs print rounding
    rate = float("%.12g" % ((t.size - 1) / (t[-1] - t[0])))
    return TimeSeries(rate, data[:, 1], start_time_s=t[0])
