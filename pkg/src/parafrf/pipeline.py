"""Synthetic measurement campaign: excite the plant, estimate and condition FRFs.

These helpers chain the building blocks the same way a measurement campaign
does. The command line front end and the acceptance tests both use them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .frf import DEFAULT_BAND_HZ, FrfDataset, band_rms, decimate, h1_estimate, smooth_dataset
from .inversion import TestRecord
from .plant import ParametricPlant, apply_frf
from .signals import Spectrum, TimeSeries, WaveShape, fft_spectrum, gen_chirp, gen_periodic
from .vecfit import VfOptions, vf_fit


@dataclass(frozen=True)
class Acquisition:
    """Excitation and recording settings of one load case."""

    sample_rate_hz: float = 256.0
    block_duration_s: float = 128.0
    n_blocks: int = 20
    snr_db: float = 40.0
    chirp_f0_hz: float = 0.01
    chirp_f1_hz: float = 100.0
    max_freq_hz: float = 100.0
    band_hz: tuple[float, float] = DEFAULT_BAND_HZ

    def __post_init__(self):
        if self.n_blocks < 1:
            raise InvalidArgumentError("n_blocks must be >= 1")
        if not 0 < self.max_freq_hz <= self.sample_rate_hz / 2:
            raise InvalidArgumentError("max_freq_hz must lie in (0, Nyquist]")


def scale_to_load(force: TimeSeries, p: float, band=DEFAULT_BAND_HZ) -> TimeSeries:
    """Rescale ``force`` so its band RMS equals ``p``."""
    ref = band_rms(fft_spectrum(force), band)
    if ref == 0:
        raise InvalidArgumentError("force has no energy in the load band")
    return force.with_samples(force.samples * (p / ref))


def chirp_force(p: float, acq: Acquisition) -> TimeSeries:
    x = gen_chirp(acq.chirp_f0_hz, acq.chirp_f1_hz, acq.block_duration_s, acq.sample_rate_hz, 1.0)
    return scale_to_load(x, p, acq.band_hz)


def test_force(shape, p: float, acq: Acquisition, freq_hz: float = 10.0,
               target_rms: float | None = None) -> TimeSeries:
    """Force record of a given waveform.

    The chirp is scaled to band RMS ``p``. Periodic waveforms have no
    meaningful band RMS, so they use ``target_rms`` (default ``p``).
    """
    shape = WaveShape(shape)
    if shape is WaveShape.PERIODIC_CHIRP:
        return chirp_force(p, acq)
    rms = p if target_rms is None else target_rms
    return gen_periodic(shape, freq_hz, acq.block_duration_s, acq.sample_rate_hz, rms)


def noise_std_for_snr(clean: TimeSeries, snr_db: float) -> float:
    return clean.rms() * 10.0 ** (-snr_db / 20.0)


def _seeds(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def measure_frf(plant: ParametricPlant, p: float, acq: Acquisition,
                rng: np.random.Generator) -> tuple[Spectrum, float]:
    """H1 estimate of the plant at load ``p`` from noisy periodic-chirp blocks.

    Every block repeats the same chirp period (steady state), with fresh
    output noise. Returns the estimate on bins ``1 .. max_freq_hz`` and the
    measured load parameter.
    """
    force = chirp_force(p, acq)
    clean = apply_frf(force, plant.frf_at(p))
    sigma = noise_std_for_snr(clean, acq.snr_db) if np.isfinite(acq.snr_db) else 0.0
    F = fft_spectrum(force)
    keep = slice(1, int(np.floor(acq.max_freq_hz / F.df_hz + 1e-9)) + 1)
    f_blocks, v_blocks = [], []
    for _ in range(acq.n_blocks):
        v = clean.samples + rng.normal(0.0, sigma, len(clean)) if sigma > 0 else clean.samples
        V = fft_spectrum(clean.with_samples(v))
        f_blocks.append(Spectrum(F.freq_hz[keep], F.values[keep]))
        v_blocks.append(Spectrum(V.freq_hz[keep], V.values[keep]))
    return h1_estimate(f_blocks, v_blocks), band_rms(F, acq.band_hz)


def acquire_dataset(plant: ParametricPlant, loads, acq: Acquisition, seed: int = 0) -> FrfDataset:
    """Raw H1 dataset over ``loads`` (columns ordered by measured band RMS)."""
    loads = np.asarray(loads, dtype=float)
    cols, params = [], []
    for p, rng in zip(loads, _seeds(seed, loads.size)):
        h, p_hat = measure_frf(plant, float(p), acq, rng)
        cols.append(h)
        params.append(p_hat)
    meta = {"n_blocks": acq.n_blocks, "snr_db": acq.snr_db, "seed": seed,
            "sample_rate_hz": acq.sample_rate_hz, "block_duration_s": acq.block_duration_s}
    return FrfDataset.from_columns(cols, params, meta)


def condition(dataset: FrfDataset, sigma_bins: float | None, factor: int) -> FrfDataset:
    """Smooth (skipped when ``sigma_bins`` is None) and then decimate."""
    if sigma_bins is not None:
        dataset = smooth_dataset(dataset, sigma_bins)
    return decimate(dataset, factor)


def fit_nonparametric(dataset: FrfDataset, order: int, opts: VfOptions | None = None):
    """One Vector Fitting model per load column."""
    models = []
    for k in range(dataset.params.size):
        model, _ = vf_fit(dataset.freq_hz, dataset.values[:, k], order, opts=opts)
        models.append(model)
    return models


def test_records(plant: ParametricPlant, loads, acq: Acquisition, shape="periodic_chirp",
                 freq_hz: float = 10.0, target_rms: float | None = None) -> list[TestRecord]:
    """Noise-free validation records; ``param`` is the measured band RMS for
    chirps and the nominal load otherwise."""
    recs = []
    for p in np.asarray(loads, dtype=float):
        f = test_force(shape, float(p), acq, freq_hz, target_rms)
        v = apply_frf(f, plant.frf_at(float(p)))
        p_hat = band_rms(fft_spectrum(f), acq.band_hz) if WaveShape(shape) is WaveShape.PERIODIC_CHIRP else float(p)
        recs.append(TestRecord(p_hat, f, v))
    return recs


__all__ = ["Acquisition", "acquire_dataset", "chirp_force", "condition",
           "fit_nonparametric", "measure_frf", "noise_std_for_snr", "scale_to_load",
           "test_force", "test_records"]
