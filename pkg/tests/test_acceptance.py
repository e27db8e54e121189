"""Acceptance criteria, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line (repeated in the
terminal summary) before asserting.
"""
import time

import numpy as np
import pytest

from parafrf import (FrfDataset, InversionOptions, ModelEntry, Spectrum, TimeSeries,
                     cross_validate, fft_spectrum, gen_periodic, h1_estimate, invert_force,
                     paaa_evaluate, paaa_fit, relative_l2, simulate_response, vf_fit)
from parafrf.cli import run
from parafrf.pipeline import (Acquisition, acquire_dataset, chirp_force, condition,
                              fit_nonparametric)
from parafrf.pipeline import test_force as make_force
from parafrf.pipeline import test_records as make_records
from parafrf.plant import apply_frf
from parafrf.vecfit import PoleResidueModel

LOAD_CASE_6 = 5  # zero-based index of the sixth load level


def exact_plant_dataset(plant, loads):
    # bins 1..12800 of a 128 s record at 256 Hz, every 8th kept: 1600 rows
    f = np.arange(1, 12801)[::8] / 128.0
    return FrfDataset(f, loads, np.column_stack([plant.response(f, p) for p in loads]))


def max_support_error(model):
    worst = 0.0
    for j, sj in enumerate(model.s_supports):
        for k, pk in enumerate(model.p_supports):
            if model.weights[j, k] != 0:
                worst = max(worst, abs(paaa_evaluate(model, sj, pk) - model.support_values[j, k]))
    return worst


def test_1_interpolation_exactness(plant, loads, acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    f = np.linspace(0.0, 2.0, 20)
    p = np.linspace(1.0, 3.0, 5)
    s = 2j * np.pi * f
    datasets = [
        FrfDataset(f, p, 1.0 / np.outer(s + 1, p + 2)),
        FrfDataset(np.arange(30.0), np.arange(1.0, 7.0),
                   rng.standard_normal((30, 6)) + 1j * rng.standard_normal((30, 6))),
        exact_plant_dataset(plant, loads),
    ]
    worst, n_pairs = 0.0, 0
    for ds in datasets:
        model, _ = paaa_fit(ds, tol_rel=1e-6)
        worst = max(worst, max_support_error(model))
        n_pairs += int(np.count_nonzero(model.weights))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    acceptance(1, "barycentric interpolation exactness", ok,
               f"max support error {worst:.1e} over {n_pairs} pairs, {elapsed:.2f} s")
    assert ok


def test_2_vector_fitting_recovery(acceptance):
    poles = np.array([-0.5 + 2 * np.pi * 3j, -1.2 + 2 * np.pi * 11j, -2.0 + 2 * np.pi * 23j])
    res = np.array([3.0 + 1j, -2.0 + 0.5j, 1.5 - 2j])
    truth = PoleResidueModel(np.r_[poles, poles.conj()], np.r_[res, res.conj()])
    f = np.linspace(0.1, 40.0, 400)
    t0 = time.perf_counter()
    model, diag = vf_fit(f, truth(f), 6)
    elapsed = time.perf_counter() - t0
    found = np.sort_complex(model.poles)
    true = np.sort_complex(truth.poles)
    rel = float(np.max(np.abs(found - true) / np.abs(true)))
    ok = rel <= 1e-6 and diag.iterations <= 30 and elapsed < 1.0
    acceptance(2, "univariate rational recovery", ok,
               f"pole error {rel:.1e}, {diag.iterations} iterations, {elapsed:.3f} s")
    assert ok


def test_3_bivariate_recovery(plant, loads, acceptance):
    ds = exact_plant_dataset(plant, loads)
    t0 = time.perf_counter()
    model, diag = paaa_fit(ds, tol_rel=1e-6)
    R = model.evaluate_grid(ds.s, ds.params)
    fit_err = float(np.max(np.abs(R - ds.values)) / np.max(np.abs(ds.values)))
    mids = [(loads[k] + loads[k + 1]) / 2 for k in (0, 3, 6, 9, 12)]
    mid_err = 0.0
    for pm in mids:
        ref = plant.response(ds.freq_hz, pm)
        est = model.slice_at(pm)(ds.freq_hz)
        mid_err = max(mid_err, float(np.max(np.abs(est - ref)) / np.max(np.abs(ref))))
    elapsed = time.perf_counter() - t0
    l, q = model.orders
    ok = fit_err <= 1e-6 and l <= 12 and q <= 6 and mid_err <= 1e-5 and elapsed < 60
    acceptance(3, "bivariate rational recovery", ok,
               f"fit error {fit_err:.1e}, orders ({l}, {q}), midpoint error {mid_err:.1e}, "
               f"{elapsed:.2f} s")
    assert ok


def test_4_exact_inverse_round_trip(plant, loads, acceptance):
    acq = Acquisition()
    p = float(loads[LOAD_CASE_6])
    t0 = time.perf_counter()
    errs = {}
    for shape in ("periodic_chirp", "sine", "triangle", "square"):
        force = make_force(shape, p, acq, freq_hz=10.0)
        vel = simulate_response(plant, force, p)
        errs[shape] = relative_l2(invert_force(vel, plant.frf_at(p)), force)
    elapsed = time.perf_counter() - t0
    ok = max(errs.values()) <= 1e-9 and elapsed < 10
    acceptance(4, "exact inverse round trip", ok,
               ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + f", {elapsed:.2f} s")
    assert ok


def test_5_end_to_end_sine(plant, loads, acceptance):
    # 20 blocks at 40 dB, narrow smoothing (1 bin), decimation by 8, p-AAA at tol 1e-3;
    # a 10 Hz sine at the sixth load level with the chirp's time-domain RMS
    acq = Acquisition(n_blocks=20, snr_db=40.0)
    t0 = time.perf_counter()
    ds = condition(acquire_dataset(plant, loads, acq, seed=0), sigma_bins=1.0, factor=8)
    model, diag = paaa_fit(ds, tol_rel=1e-3)
    k = LOAD_CASE_6
    rms = chirp_force(float(loads[k]), acq).rms()
    force = gen_periodic("sine", 10.0, acq.block_duration_s, acq.sample_rate_hz, rms)
    vel = apply_frf(force, plant.frf_at(float(loads[k])))
    est = invert_force(vel, model.slice_at(float(ds.params[k])), InversionOptions())
    err = relative_l2(est, force)
    elapsed = time.perf_counter() - t0
    ok = err <= 0.05 and elapsed < 120
    acceptance(5, "end-to-end fitted round trip (10 Hz sine)", ok,
               f"relative L2 {err:.4f}, p-AAA orders {model.orders} ({diag.stopped_reason}), "
               f"{elapsed:.1f} s")
    assert ok


def test_6_cross_validation_structure(plant, loads, acceptance):
    # noise-free identification through the measurement chain (H1 of a periodic
    # chirp, decimation by 8); one order-10 Vector Fitting model per load
    acq = Acquisition(n_blocks=1, snr_db=np.inf)
    t0 = time.perf_counter()
    ds = condition(acquire_dataset(plant, loads, acq, seed=0), sigma_bins=None, factor=8)
    np_models = fit_nonparametric(ds, 10)
    pmodel, _ = paaa_fit(ds, tol_rel=1e-6)
    entries = [ModelEntry(p, m) for p, m in zip(ds.params, np_models)]
    entries.append(ModelEntry(float("nan"), pmodel, "paaa"))
    cv = cross_validate(entries, make_records(plant, loads, acq), workers=4)
    E = cv.errors[:-1]
    diag_ok = bool(np.all(E.argmin(axis=1) == np.arange(E.shape[0])))
    np_best = float(E.sum(axis=1).min())
    p_total = float(cv.errors[-1].sum())
    elapsed = time.perf_counter() - t0
    ok = diag_ok and p_total <= np_best and elapsed < 300
    acceptance(6, "cross-validation structure", ok,
               f"row minima on diagonal: {diag_ok}, parametric total {p_total:.3e} vs best "
               f"non-parametric total {np_best:.3f}, {elapsed:.1f} s")
    assert ok


def test_7_metric_identities(acceptance):
    rng = np.random.default_rng(7)
    f = TimeSeries(100.0, rng.standard_normal(1000))
    g = TimeSeries(100.0, rng.standard_normal(1000))
    e_same = relative_l2(f, f)
    e_zero = relative_l2(f.with_samples(np.zeros(1000)), f)
    e_double = relative_l2(f.with_samples(2 * f.samples), f)
    base = relative_l2(g, f)
    scale_dev = max(abs(relative_l2(g.with_samples(c * g.samples), f.with_samples(c * f.samples)) - base)
                    / base for c in (1e-6, -3.7, 2.0 ** 20, 1e9))
    ok = e_same == 0.0 and e_zero == 1.0 and e_double == 1.0 and scale_dev <= 1e-12
    acceptance(7, "relative L2 identities", ok,
               f"{e_same}, {e_zero}, {e_double}; scale deviation {scale_dev:.1e}")
    assert ok


def test_8_h1_convergence(plant, acceptance):
    fs, n = 64.0, 1024
    p = 0.004
    force = chirp_force(p, Acquisition(sample_rate_hz=fs, block_duration_s=n / fs,
                                       chirp_f1_hz=30.0, max_freq_hz=30.0))
    clean = apply_frf(force, plant.frf_at(p))
    F = fft_spectrum(force)
    keep = slice(1, 481)
    Fb = Spectrum(F.freq_hz[keep], F.values[keep])
    H = plant.response(Fb.freq_hz, p)
    sigma = clean.rms() * 10 ** (-20 / 20)
    t0 = time.perf_counter()
    counts = [4, 16, 64, 256]
    errs = []
    for n_blocks in counts:
        rng = np.random.default_rng(n_blocks)
        vb = []
        for _ in range(n_blocks):
            V = fft_spectrum(clean.with_samples(clean.samples + rng.normal(0, sigma, n)))
            vb.append(Spectrum(V.freq_hz[keep], V.values[keep]))
        est = h1_estimate([Fb] * n_blocks, vb).values
        errs.append(float(np.sqrt(np.mean(np.abs(est - H) ** 2))))
    slope = float(np.polyfit(np.log(counts), np.log(errs), 1)[0])
    elapsed = time.perf_counter() - t0
    ok = abs(slope + 0.5) <= 0.15 and elapsed < 30
    acceptance(8, "H1 estimator convergence", ok,
               f"log-log slope {slope:.3f}, errors " + ", ".join(f"{e:.2e}" for e in errs)
               + f", {elapsed:.2f} s")
    assert ok


def test_9_cli_determinism(tmp_path, acceptance):
    import json
    cfg = {
        "format_version": 1, "seed": 5,
        "loads": [0.001, 0.003, 0.005, 0.007, 0.009],
        "acquisition": {"sample_rate_hz": 64, "block_duration_s": 32, "n_blocks": 4,
                        "chirp_f1_hz": 30, "max_freq_hz": 30},
        "smoothing": {"sigma_bins": 1.0}, "decimate": {"factor": 2}, "vf": {"order": 10},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))

    def pipeline(out):
        c = ["--config", str(path), "--out", str(out)]
        codes = [
            run(["synth", *c]),
            run(["frf", *c, "--manifest", str(out / "synth_manifest.json")]),
            run(["fit-vf", *c, "--dataset", str(out / "frf_dataset.csv")]),
            run(["fit-paaa", *c, "--dataset", str(out / "frf_dataset.csv")]),
            run(["xval", *c, "--manifest", str(out / "synth_manifest.json"),
                 "--vf", str(out / "vf_models.json"), "--paaa", str(out / "paaa_model.json")]),
            run(["report", *c, "--xval", str(out / "xval.json")]),
            run(["invert", *c, "--vf", str(out / "vf_models.json"), "--index", "2",
                 "--velocity", str(out / "records/test_02_velocity.csv")]),
        ]
        files = {q.relative_to(out).as_posix(): q.read_bytes() for q in sorted(out.rglob("*")) if q.is_file()}
        return codes, files

    codes_a, a = pipeline(tmp_path / "a")
    codes_b, b = pipeline(tmp_path / "b")
    differing = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    ok = codes_a == codes_b == [0] * 7 and not differing
    acceptance(9, "CLI determinism", ok,
               f"{len(a)} files compared, {len(differing)} differ" + (f": {differing[:3]}" if differing else ""))
    assert ok
