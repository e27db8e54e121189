"""Force reconstruction by frequency-domain model inversion and cross-validation."""
from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _io
from .errors import (DegenerateReferenceError, DivisionSingularityError, InvalidArgumentError,
                     NumericalInconsistencyError, ParafrfError)
from .signals import Spectrum, TimeSeries, fft_spectrum, ifft_real

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InversionOptions:
    """Conditioning of the spectral division ``F = V / H``.

    ``magnitude_floor`` clamps ``|H|`` from below (phase kept);
    ``regularization_eps`` switches to the Tikhonov form
    ``V conj(H) / (|H|^2 + eps^2)``. At most one of the two may be nonzero.
    """

    magnitude_floor: float = 0.0
    regularization_eps: float = 0.0
    detrend: bool = True

    def __post_init__(self):
        for name in ("magnitude_floor", "regularization_eps"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InvalidArgumentError(f"{name} must be a nonnegative real, got {v}")
        if self.magnitude_floor > 0 and self.regularization_eps > 0:
            raise InvalidArgumentError("set at most one of magnitude_floor and regularization_eps")


def _model_spectrum(frf: Callable, freq_hz: np.ndarray, n: int) -> np.ndarray:
    H = np.asarray(frf(freq_hz), dtype=complex).reshape(freq_hz.shape)
    H[0] = 0.0
    # the Nyquist bin of a real record is real; same projection as the forward simulation
    if n % 2 == 0:
        H[-1] = H[-1].real
    bad = np.flatnonzero(~np.isfinite(H))
    if bad.size:
        raise NumericalInconsistencyError(
            f"model is not finite at {freq_hz[bad[0]]:.17g} Hz")
    return H


def invert_force(velocity: TimeSeries, frf: Callable, opts: InversionOptions | None = None) -> TimeSeries:
    """Estimate the force that produced ``velocity`` through the system ``frf``.

    ``frf`` maps frequencies in Hz to complex responses. The DC bin of the
    estimate is always zero since a mobility carries no DC information.
    """
    opts = opts or InversionOptions()
    if len(velocity) < 2:
        raise InvalidArgumentError("velocity needs at least two samples")
    v = velocity
    if opts.detrend:
        v = v.with_samples(v.samples - v.samples.mean())
    V = fft_spectrum(v)
    n = len(v)
    H = _model_spectrum(frf, V.freq_hz, n)
    F = np.zeros_like(V.values)
    k = np.arange(1, H.size)
    Hk, Vk = H[k], V.values[k]
    if opts.regularization_eps > 0:
        F[k] = Vk * np.conj(Hk) / (np.abs(Hk) ** 2 + opts.regularization_eps ** 2)
    else:
        mag = np.abs(Hk)
        if opts.magnitude_floor > 0:
            low = mag < opts.magnitude_floor
            phase = np.where(mag > 0, Hk / np.where(mag > 0, mag, 1.0), 1.0)
            Hk = np.where(low, opts.magnitude_floor * phase, Hk)
        else:
            zero = np.flatnonzero(mag == 0)
            if zero.size:
                # a zero real-projected Nyquist response carries no signal; leave it at 0
                if not (n % 2 == 0 and zero[0] == k.size - 1):
                    raise DivisionSingularityError(V.freq_hz[k[zero[0]]])
                Hk = np.where(mag == 0, np.inf, Hk)
        F[k] = Vk / Hk
    out = ifft_real(Spectrum(V.freq_hz, F, n_samples=n), n, v.sample_rate_hz)
    return dataclasses.replace(out, start_time_s=velocity.start_time_s)


def relative_l2(estimated: TimeSeries, measured: TimeSeries) -> float:
    """``||estimated - measured|| / ||measured||`` over the samples."""
    if len(estimated) != len(measured):
        raise InvalidArgumentError(f"length mismatch: {len(estimated)} vs {len(measured)}")
    if estimated.sample_rate_hz != measured.sample_rate_hz:
        raise InvalidArgumentError("sample rates differ")
    den = np.linalg.norm(measured.samples)
    if den == 0:
        raise DegenerateReferenceError("measured signal is identically zero")
    return float(np.linalg.norm(estimated.samples - measured.samples) / den)


@dataclass(frozen=True)
class TestRecord:
    """One measured load case: input force, output velocity and load parameter."""

    param: float
    force: TimeSeries
    velocity: TimeSeries

    __test__ = False


@dataclass(frozen=True)
class ModelEntry:
    """A model row of the cross-validation matrix.

    ``param`` is the training load of a non-parametric model; for a
    parametric model it is ``nan`` and ``frf`` must provide ``slice_at(p)``.
    """

    param: float
    frf: object
    label: str = ""

    @property
    def parametric(self) -> bool:
        return hasattr(self.frf, "slice_at")


@dataclass(frozen=True)
class CrossValMatrix:
    model_params: np.ndarray
    test_params: np.ndarray
    errors: np.ndarray
    reasons: dict = field(default_factory=dict)
    model_labels: tuple = ()

    def __post_init__(self):
        mp = np.asarray(self.model_params, dtype=float).ravel()
        tp = np.asarray(self.test_params, dtype=float).ravel()
        e = np.asarray(self.errors, dtype=float)
        if e.shape != (mp.size, tp.size):
            raise InvalidArgumentError(f"errors shape {e.shape} != ({mp.size}, {tp.size})")
        if np.any(e < 0) or np.any(np.isnan(e)):
            raise InvalidArgumentError("errors must be nonnegative")
        object.__setattr__(self, "model_params", mp)
        object.__setattr__(self, "test_params", tp)
        object.__setattr__(self, "errors", e)
        labels = tuple(self.model_labels) or tuple(_default_label(p) for p in mp)
        object.__setattr__(self, "model_labels", labels)

    @property
    def totals(self) -> np.ndarray:
        """Per-model sum of the errors over all test cases."""
        return self.errors.sum(axis=1)


def _default_label(p):
    return "parametric" if math.isnan(p) else f"np@{p:.6g}"


def _cell(entry: ModelEntry, rec: TestRecord, opts):
    frf = entry.frf.slice_at(rec.param) if entry.parametric else entry.frf
    est = invert_force(rec.velocity, frf, opts)
    return relative_l2(est, rec.force)


def cross_validate(models: Sequence[ModelEntry], test_sets: Sequence[TestRecord],
                   opts: InversionOptions | None = None, workers: int = 1) -> CrossValMatrix:
    """Force-reconstruction error of every model on every test case.

    A cell whose inversion fails records ``inf`` and the error text in
    ``reasons[(m, t)]``; the matrix is always complete.
    """
    if not models or not test_sets:
        raise InvalidArgumentError("need at least one model and one test set")
    rate = test_sets[0].force.sample_rate_hz
    for rec in test_sets:
        if rec.force.sample_rate_hz != rate or rec.velocity.sample_rate_hz != rate:
            raise InvalidArgumentError("all test records must share one sample rate")
    cells = [(m, t) for m in range(len(models)) for t in range(len(test_sets))]

    def run(mt):
        m, t = mt
        try:
            return _cell(models[m], test_sets[t], opts), None
        except ParafrfError as exc:
            return math.inf, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(mt) for mt in cells]
    errors = np.empty((len(models), len(test_sets)))
    reasons = {}
    for (m, t), (err, why) in zip(cells, results):
        errors[m, t] = err
        if why is not None:
            reasons[(m, t)] = why
            logger.warning("cross-validation cell (%d, %d) failed: %s", m, t, why)
    return CrossValMatrix([e.param for e in models], [r.param for r in test_sets], errors,
                          reasons, tuple(e.label or _default_label(e.param) for e in models))


def write_crossval(path_csv, cv: CrossValMatrix, provenance: dict | None = None) -> None:
    """Long-format CSV ``model_param,test_param,e_l2`` and a JSON summary.

    Parametric rows are evaluated at the test load, so their ``model_param``
    is written as the test parameter.
    """
    from pathlib import Path
    path_csv = Path(path_csv)
    lines = [_io.comment_line(provenance), "model_param,test_param,e_l2\n"]
    for m, mp in enumerate(cv.model_params):
        for t, tp in enumerate(cv.test_params):
            shown = tp if math.isnan(mp) else mp
            lines.append(f"{_io.fmt(shown)},{_io.fmt(tp)},{_io.fmt(cv.errors[m, t])}\n")
    _io.atomic_write_text(path_csv, "".join(lines))
    summary = {
        "models": [
            {"label": lab, "model_param": None if math.isnan(mp) else float(mp),
             "total_e_l2": _json_float(tot)}
            for lab, mp, tot in zip(cv.model_labels, cv.model_params, cv.totals)
        ],
        "test_params": [float(x) for x in cv.test_params],
        "failures": [{"model": m, "test": t, "reason": r} for (m, t), r in sorted(cv.reasons.items())],
    }
    if provenance:
        summary["provenance"] = provenance
    _io.atomic_write_json(path_csv.with_suffix(".json"), summary)


def _json_float(x):
    return float(x) if np.isfinite(x) else "inf"
