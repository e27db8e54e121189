"""Command line front end: ``parafrf <subcommand> [options]``.

Exit status is 0 on success, 2 for usage, configuration and missing-file
problems, and 1 when a processing step raises a library error. Diagnostics
are a single line on stderr: ``parafrf: error: <kind>: <message>``.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, _io
from .config import ConfigError, RunConfig, default_config, load_config
from .errors import ParafrfError
from .frf import FrfDataset, band_rms, read_dataset, write_dataset
from .inversion import (InversionOptions, ModelEntry, TestRecord, cross_validate,
                        invert_force, write_crossval)
from .paaa import ParametricBarycentricModel, paaa_fit
from .pipeline import Acquisition, acquire_dataset, chirp_force, condition, test_force
from .plant import ParametricPlant, apply_frf, default_boom_plant, default_load_levels, load_plant
from .signals import Spectrum, fft_spectrum, read_timeseries_csv, write_timeseries_csv
from .vecfit import PoleResidueModel, VfOptions, vf_fit

OUT_ENV = "PARAFRF_OUT"


class UsageError(Exception):
    """Bad invocation or missing input (exit status 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- shared helpers -----------------------------------------------------------------

class Context:
    def __init__(self, args):
        self.cfg: RunConfig = load_config(_existing(args.config)) if args.config else default_config()
        out = args.out or os.environ.get(OUT_ENV) or "."
        self.out = Path(out)
        self.provenance = self.cfg.provenance(__version__)

    def path(self, name: str) -> Path:
        return self.out / name

    def plant(self) -> ParametricPlant:
        src = self.cfg["plant"]
        return load_plant(_existing(src)) if src else default_boom_plant()

    def loads(self) -> np.ndarray:
        loads = self.cfg["loads"]
        return np.asarray(loads, dtype=float) if loads is not None else default_load_levels()

    def acquisition(self) -> Acquisition:
        a = self.cfg.section("acquisition")
        snr = a.pop("snr_db")
        return Acquisition(snr_db=math.inf if snr is None else snr,
                           band_hz=tuple(self.cfg["band_hz"]), **a)

    def inversion(self) -> InversionOptions:
        return InversionOptions(**self.cfg.section("inversion"))


def _existing(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file not found: {p}")
    return p


def _read_json(path) -> dict:
    try:
        return json.loads(_existing(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc.msg})") from None


def _grid(acq: Acquisition) -> np.ndarray:
    n = int(round(acq.block_duration_s * acq.sample_rate_hz))
    df = acq.sample_rate_hz / n
    kmax = int(np.floor(acq.max_freq_hz / df + 1e-9))
    return np.arange(1, kmax + 1) * df


def _load_records(manifest_path, key: str) -> list[TestRecord]:
    manifest = _read_json(manifest_path)
    base = Path(manifest_path).parent
    recs = []
    for entry in manifest[key]:
        f = read_timeseries_csv(_existing(base / entry["force"]))
        v = read_timeseries_csv(_existing(base / entry["velocity"]))
        recs.append(TestRecord(float(entry["param"]), f, v))
    return recs


# --- subcommands --------------------------------------------------------------------

def cmd_synth(ctx: Context, args) -> None:
    plant, loads, acq = ctx.plant(), ctx.loads(), ctx.acquisition()
    test = ctx.cfg.section("test")
    prov = ctx.provenance
    _io.atomic_write_json(ctx.path("plant.json"), dict(plant.to_dict(), provenance=prov))

    freq = _grid(acq)
    exact = FrfDataset(freq, loads, np.column_stack([plant.response(freq, p) for p in loads]),
                       {"source": "closed-form plant"})
    exact = condition(exact, None, ctx.cfg["decimate"]["factor"])
    write_dataset(ctx.path("exact_dataset.csv"), exact, ctx.cfg["band_hz"], prov)

    seeds = np.random.SeedSequence(ctx.cfg["seed"]).spawn(loads.size)
    acq_entries, test_entries = [], []
    for k, (p, ss) in enumerate(zip(loads, seeds)):
        rng = np.random.default_rng(ss)
        force = chirp_force(float(p), acq)
        clean = apply_frf(force, plant.frf_at(float(p)))
        sigma = clean.rms() * 10 ** (-acq.snr_db / 20) if np.isfinite(acq.snr_db) else 0.0
        vel = np.concatenate([clean.samples + (rng.normal(0.0, sigma, len(clean)) if sigma else 0.0)
                              for _ in range(acq.n_blocks)])
        fname, vname = f"records/acq_{k:02d}_force.csv", f"records/acq_{k:02d}_velocity.csv"
        write_timeseries_csv(ctx.path(fname), force, prov)
        write_timeseries_csv(ctx.path(vname), clean.with_samples(vel), prov)
        acq_entries.append({"param": float(p), "force": fname, "velocity": vname})

    test_loads = test["loads"] if test["loads"] is not None else loads
    for k, p in enumerate(np.asarray(test_loads, dtype=float)):
        f = test_force(test["shape"], float(p), acq, test["freq_hz"], test["target_rms"])
        v = apply_frf(f, plant.frf_at(float(p)))
        fname, vname = f"records/test_{k:02d}_force.csv", f"records/test_{k:02d}_velocity.csv"
        write_timeseries_csv(ctx.path(fname), f, prov)
        write_timeseries_csv(ctx.path(vname), v, prov)
        test_entries.append({"param": float(p), "force": fname, "velocity": vname})

    _io.atomic_write_json(ctx.path("synth_manifest.json"), {
        "acquisition": acq_entries, "tests": test_entries,
        "n_blocks": acq.n_blocks, "config": ctx.cfg.data, "provenance": prov})


def cmd_frf(ctx: Context, args) -> None:
    from .frf import h1_estimate
    acq = ctx.acquisition()
    if args.manifest:
        manifest_dir = Path(args.manifest).parent
        entries = _read_json(args.manifest)["acquisition"]
        cols, params = [], []
        for entry in entries:
            force = read_timeseries_csv(_existing(manifest_dir / entry["force"]))
            vel = read_timeseries_csv(_existing(manifest_dir / entry["velocity"]))
            n = len(force)
            if len(vel) % n:
                raise UsageError(f"{entry['velocity']}: length is not a multiple of the force period")
            F = fft_spectrum(force)
            keep = slice(1, int(np.floor(acq.max_freq_hz / F.df_hz + 1e-9)) + 1)
            fb, vb = [], []
            for blk in vel.blocks(n):
                V = fft_spectrum(blk)
                fb.append(Spectrum(F.freq_hz[keep], F.values[keep]))
                vb.append(Spectrum(V.freq_hz[keep], V.values[keep]))
            cols.append(h1_estimate(fb, vb))
            params.append(band_rms(F, acq.band_hz))
        raw = FrfDataset.from_columns(cols, params, {"source": Path(args.manifest).name})
    else:
        raw = acquire_dataset(ctx.plant(), ctx.loads(), acq, ctx.cfg["seed"])
    ds = condition(raw, ctx.cfg["smoothing"]["sigma_bins"], ctx.cfg["decimate"]["factor"])
    write_dataset(ctx.path("frf_dataset.csv"), ds, ctx.cfg["band_hz"], ctx.provenance)


def cmd_fit_vf(ctx: Context, args) -> None:
    ds = read_dataset(_existing(args.dataset))
    v = ctx.cfg.section("vf")
    opts = VfOptions(tol=v["tol"], max_iters=v["max_iters"], relaxed=v["relaxed"],
                     enforce_stability=v["enforce_stability"])
    models = []
    for k, p in enumerate(ds.params):
        model, diag = vf_fit(ds.freq_hz, ds.values[:, k], v["order"], opts=opts)
        models.append({"param": float(p), "model": model.to_dict(),
                       "iterations": diag.iterations, "converged": diag.converged,
                       "weighted_ls_error": float(diag.final_weighted_ls_error)})
    _io.atomic_write_json(ctx.path("vf_models.json"), {
        "models": models, "training_digest": ds.digest(), "provenance": ctx.provenance})


def cmd_fit_paaa(ctx: Context, args) -> None:
    ds = read_dataset(_existing(args.dataset))
    c = ctx.cfg.section("paaa")
    tol = args.tol if args.tol is not None else c["tol"]
    model, diag = paaa_fit(ds, tol, c["max_l"], c["max_q"], c["stagnation_window"],
                           c["stagnation_drop"])
    d = model.to_dict(tolerance_achieved=min(diag.error_history),
                      training_digest=ds.digest(), provenance=ctx.provenance)
    d["diagnostics"] = {"error_history": [float(e) for e in diag.error_history],
                        "stopped_reason": diag.stopped_reason,
                        "selected_pairs": [list(p) for p in diag.selected_pairs],
                        "order_history": [list(o) for o in diag.order_history]}
    _io.atomic_write_json(ctx.path("paaa_model.json"), d)


def _load_models(args) -> list[ModelEntry]:
    entries = []
    if getattr(args, "vf", None):
        for item in _read_json(args.vf)["models"]:
            p = float(item["param"])
            entries.append(ModelEntry(p, PoleResidueModel.from_dict(item["model"]), f"vf@{p:.6g}"))
    if getattr(args, "paaa", None):
        entries.append(ModelEntry(math.nan, ParametricBarycentricModel.from_dict(_read_json(args.paaa)),
                                  "paaa"))
    return entries


def cmd_invert(ctx: Context, args) -> None:
    vel = read_timeseries_csv(_existing(args.velocity))
    if args.paaa:
        if args.param is None:
            raise UsageError("--param is required with a parametric model")
        frf = ParametricBarycentricModel.from_dict(_read_json(args.paaa)).slice_at(args.param)
    elif args.vf:
        models = _read_json(args.vf)["models"]
        if not 0 <= args.index < len(models):
            raise UsageError(f"--index must lie in [0, {len(models) - 1}]")
        frf = PoleResidueModel.from_dict(models[args.index]["model"])
    else:
        raise UsageError("one of --paaa or --vf is required")
    est = invert_force(vel, frf, ctx.inversion())
    write_timeseries_csv(ctx.path(args.name), est, ctx.provenance)


def cmd_xval(ctx: Context, args) -> None:
    tests = _load_records(_existing(args.manifest), "tests")
    models = _load_models(args)
    if args.plant_models:
        plant = ctx.plant()
        models += [ModelEntry(r.param, plant.frf_at(r.param), f"plant@{r.param:.6g}") for r in tests]
    if not models:
        raise UsageError("no models given (use --vf, --paaa or --plant-models)")
    cv = cross_validate(models, tests, ctx.inversion())
    write_crossval(ctx.path("xval.csv"), cv, ctx.provenance)


def cmd_report(ctx: Context, args) -> None:
    summary = _read_json(args.xval)
    rows = summary["models"]
    nonpar = [r for r in rows if r["model_param"] is not None]
    par = [r for r in rows if r["model_param"] is None]

    def tot(r):
        return math.inf if r["total_e_l2"] == "inf" else float(r["total_e_l2"])

    best = min(nonpar, key=tot) if nonpar else None
    lines = ["# Force reconstruction summary", "",
             f"Test loads: {len(summary['test_params'])}", "",
             "| model | model_param | total E_L2 |", "|---|---|---|"]
    csv = [_io.comment_line(ctx.provenance), "label,model_param,total_e_l2\n"]
    for r in rows:
        mp = "" if r["model_param"] is None else _io.fmt(r["model_param"])
        lines.append(f"| {r['label']} | {mp or '-'} | {_io.fmt(tot(r))} |")
        csv.append(f"{r['label']},{mp},{_io.fmt(tot(r))}\n")
    lines.append("")
    if best is not None:
        lines.append(f"Best non-parametric model: {best['label']} (total {_io.fmt(tot(best))})")
    for r in par:
        line = f"Parametric model {r['label']}: total {_io.fmt(tot(r))}"
        if best is not None and math.isfinite(tot(best)) and tot(best) > 0:
            line += f", change vs best non-parametric {100 * (tot(r) / tot(best) - 1):+.2f} %"
        lines.append(line)
    if summary.get("failures"):
        lines += ["", f"Failed cells: {len(summary['failures'])}"]
    prov = " ".join(f"{k}={v}" for k, v in sorted(ctx.provenance.items()))
    lines += ["", f"<!-- {prov} -->", ""]
    _io.atomic_write_text(ctx.path("report.md"), "\n".join(lines))
    _io.atomic_write_text(ctx.path("report.csv"), "".join(csv))


# --- entry point --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON)")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")

    parser = _Parser(prog="parafrf", description="Parametric FRF identification and force inversion")
    parser.add_argument("--version", action="version", version=f"parafrf {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sub.add_parser("synth", parents=[common], help="simulate plant datasets and records")
    p = sub.add_parser("frf", parents=[common], help="H1, smoothing, decimation, band RMS")
    p.add_argument("--manifest", help="synth manifest; without it the plant is simulated in memory")
    p = sub.add_parser("fit-vf", parents=[common], help="per-load Vector Fitting")
    p.add_argument("--dataset", required=True)
    p = sub.add_parser("fit-paaa", parents=[common], help="parametric AAA fit")
    p.add_argument("--dataset", required=True)
    p.add_argument("--tol", type=float, help="overrides paaa.tol")
    p = sub.add_parser("invert", parents=[common], help="reconstruct a force record")
    p.add_argument("--velocity", required=True)
    p.add_argument("--paaa")
    p.add_argument("--vf")
    p.add_argument("--index", type=int, default=0, help="model index within --vf")
    p.add_argument("--param", type=float, help="load parameter for --paaa")
    p.add_argument("--name", default="force_estimate.csv")
    p = sub.add_parser("xval", parents=[common], help="cross-validation matrix")
    p.add_argument("--manifest", required=True)
    p.add_argument("--vf")
    p.add_argument("--paaa")
    p.add_argument("--plant-models", action="store_true", help="add exact plant slices as models")
    p = sub.add_parser("report", parents=[common], help="Markdown and CSV error summary")
    p.add_argument("--xval", required=True, help="JSON summary written by xval")
    return parser


COMMANDS = {"synth": cmd_synth, "frf": cmd_frf, "fit-vf": cmd_fit_vf, "fit-paaa": cmd_fit_paaa,
            "invert": cmd_invert, "xval": cmd_xval, "report": cmd_report}


def _fail(kind: str, message: str, code: int) -> int:
    text = " ".join(str(message).split())
    print(f"parafrf: error: {kind}: {text}", file=sys.stderr)
    return code


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        ctx = Context(args)
        COMMANDS[args.command](ctx, args)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    except ConfigError as exc:
        return _fail("config", exc, 2)
    except ParafrfError as exc:
        return _fail(type(exc).__name__, exc, 1)
    except OSError as exc:
        return _fail("io", exc, 2)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
