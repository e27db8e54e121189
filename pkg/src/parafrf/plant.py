"""Ground-truth synthetic plant: a load-parameterized modal mobility model.

Each mode contributes ``g * s / (s**2 + 2*zeta(p)*w(p)*s + w(p)**2)`` with the
natural frequency and damping ratio affine in the load parameter ``p``, so
``H(s, p)`` is a genuine bivariate rational function.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError
from .signals import Spectrum, TimeSeries, fft_spectrum, ifft_real


@dataclass(frozen=True)
class Mode:
    """One mode; ``freq_hz`` and ``damping`` hold the values at ``p_min`` and ``p_max``."""

    freq_hz: tuple[float, float]
    damping: tuple[float, float]
    gain: float


@dataclass(frozen=True)
class ModalParams:
    modes: tuple[Mode, ...]
    p_range: tuple[float, float]

    def __post_init__(self):
        lo, hi = self.p_range
        if not (0 <= lo < hi):
            raise InvalidArgumentError("p_range must satisfy 0 <= p_min < p_max")
        for m in self.modes:
            # affine maps attain their extremes at the range ends
            if min(m.freq_hz) <= 0:
                raise InvalidArgumentError("natural frequencies must stay positive")
            if not (0 < min(m.damping) and max(m.damping) < 1):
                raise InvalidArgumentError("damping ratios must stay inside (0, 1)")
        f_lo = [m.freq_hz[0] for m in self.modes]
        if f_lo != sorted(f_lo):
            raise InvalidArgumentError("modes must be sorted by natural frequency at p_min")

    def _frac(self, p):
        lo, hi = self.p_range
        return (np.asarray(p, dtype=float) - lo) / (hi - lo)

    def natural_freq_hz(self, mode: int, p):
        m = self.modes[mode]
        return m.freq_hz[0] + (m.freq_hz[1] - m.freq_hz[0]) * self._frac(p)

    def damping_ratio(self, mode: int, p):
        m = self.modes[mode]
        return m.damping[0] + (m.damping[1] - m.damping[0]) * self._frac(p)


@dataclass(frozen=True)
class ParametricPlant:
    modal: ModalParams
    noise_std: float = 0.0

    def __post_init__(self):
        if not self.noise_std >= 0:
            raise InvalidArgumentError("noise_std must be non-negative")

    @property
    def p_range(self):
        return self.modal.p_range

    def _check_p(self, p):
        lo, hi = self.modal.p_range
        if not (lo <= p <= hi):
            raise InvalidArgumentError(f"load parameter {p} outside plant range [{lo}, {hi}]")

    def response(self, freq_hz, p: float) -> np.ndarray:
        """Closed-form ``H(2j*pi*f, p)`` at arbitrary (possibly negative) frequencies."""
        self._check_p(p)
        s = 2j * np.pi * np.asarray(freq_hz, dtype=float)
        h = np.zeros(s.shape, dtype=complex)
        for i, m in enumerate(self.modal.modes):
            w = 2 * np.pi * self.modal.natural_freq_hz(i, p)
            z = self.modal.damping_ratio(i, p)
            h += m.gain * s / (s * s + 2 * z * w * s + w * w)
        return h

    def response_dp(self, freq_hz, p: float) -> np.ndarray:
        """Analytic derivative of :meth:`response` with respect to ``p``."""
        self._check_p(p)
        s = 2j * np.pi * np.asarray(freq_hz, dtype=float)
        span = self.modal.p_range[1] - self.modal.p_range[0]
        out = np.zeros(s.shape, dtype=complex)
        for i, m in enumerate(self.modal.modes):
            w = 2 * np.pi * self.modal.natural_freq_hz(i, p)
            z = self.modal.damping_ratio(i, p)
            dw = 2 * np.pi * (m.freq_hz[1] - m.freq_hz[0]) / span
            dz = (m.damping[1] - m.damping[0]) / span
            den = s * s + 2 * z * w * s + w * w
            dden = 2 * s * (dz * w + z * dw) + 2 * w * dw
            out += -m.gain * s * dden / den ** 2
        return out

    def frf_at(self, p: float) -> "PlantSlice":
        self._check_p(p)
        return PlantSlice(self, float(p))

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "p_range": list(self.modal.p_range),
            "noise_std": self.noise_std,
            "modes": [{"freq_hz": list(m.freq_hz), "damping": list(m.damping), "gain": m.gain}
                      for m in self.modal.modes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParametricPlant":
        try:
            modes = tuple(Mode(tuple(m["freq_hz"]), tuple(m["damping"]), float(m["gain"]))
                          for m in d["modes"])
            modal = ModalParams(modes, tuple(d["p_range"]))
        except (KeyError, TypeError) as exc:
            raise InvalidArgumentError(f"malformed plant config: {exc}") from exc
        return cls(modal, float(d.get("noise_std", 0.0)))

    def with_noise(self, noise_std: float) -> "ParametricPlant":
        return dataclasses.replace(self, noise_std=float(noise_std))


@dataclass(frozen=True)
class PlantSlice:
    """The plant frozen at one load level, callable on frequencies in Hz."""

    plant: ParametricPlant
    p: float

    def __call__(self, freq_hz):
        return self.plant.response(freq_hz, self.p)


def _default_config() -> dict:
    return json.loads(resources.files("parafrf.data").joinpath("default_plant.json").read_text())


def default_boom_plant() -> ParametricPlant:
    """Five-mode plant on ``p in [0.00065, 0.01]`` N RMS.

    Mode 1 moves from 5.6 Hz to 4.8 Hz with damping 1 % -> 3 %; the four
    higher modes sit at fixed frequencies between 15 and 90 Hz, and mode 2
    has a mildly load-dependent damping ratio.
    """
    return ParametricPlant.from_dict(_default_config())


def default_load_levels() -> np.ndarray:
    """15 load parameters: the shaker voltage ladder mapped affinely onto ``p_range``."""
    cfg = _default_config()
    volts = np.asarray(cfg["shaker_voltages"], dtype=float)
    lo, hi = cfg["p_range"]
    return lo + (volts - volts[0]) / (volts[-1] - volts[0]) * (hi - lo)


def plant_frf(plant: ParametricPlant, freq_hz, p: float) -> Spectrum:
    """Exact plant response on a uniform grid, as a :class:`Spectrum`."""
    return Spectrum(freq_hz, plant.response(freq_hz, p))


def apply_frf(force: TimeSeries, frf) -> TimeSeries:
    """Periodic (circular) response of a linear system to ``force``.

    The Nyquist bin of a real periodic record carries a real amplitude, so the
    response there is projected with ``Re H``; :func:`parafrf.inversion.invert_force`
    uses the same projection.
    """
    X = fft_spectrum(force)
    n = len(force)
    H = np.asarray(frf(X.freq_hz), dtype=complex)
    H[0] = H[0].real
    if n % 2 == 0:
        H[-1] = H[-1].real
    return ifft_real(Spectrum(X.freq_hz, H * X.values), n, force.sample_rate_hz)


def simulate_response(plant: ParametricPlant, force: TimeSeries, p: float,
                      seed: int | None = 0) -> TimeSeries:
    """Velocity response ``V = H(p) F`` plus seeded Gaussian output noise.

    ``force`` is treated as one period of a periodic excitation (the record
    is the analysis window).
    """
    plant._check_p(p)
    v = apply_frf(force, plant.frf_at(p))
    if plant.noise_std > 0:
        rng = np.random.default_rng(seed)
        v = v.with_samples(v.samples + rng.normal(0.0, plant.noise_std, len(v)))
    return v


def load_plant(path) -> ParametricPlant:
    with open(path) as fh:
        return ParametricPlant.from_dict(json.load(fh))
