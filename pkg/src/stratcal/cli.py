"""Command line front end.

Every command writes ``<command>.json`` (tool version, resolved config,
dataset summary, results, warnings) plus CSV side tables into ``--out``.
Exit codes: 0 success, 2 usage error, 3 ``validate`` verdict failed,
4 bad input, 5 analysis failure.
"""
from __future__ import annotations

import csv
import functools
import io
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, recalibration, sensitivity
from .binning import TiePolicy, bin_stats, partition
from .data import (FixedLevels, LogUniform, SyntheticSpec, generate_synthetic, load_dataset,
                   stratification_profile, write_dataset)
from .errors import AnalysisError, InputError
from .intercept import default_grid, fit_intercept, metric_series
from .kernels import BACKEND
from .metrics import MetricKind, average_calibration, ence, zve

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 3
EXIT_INPUT = 4
EXIT_ANALYSIS = 5

_LOGGER = logging.getLogger("stratcal")

TIES = {"keep": "keep", "random": "random", "abs-error": "abs_error_asc"}


# --------------------------------------------------------------------------
# report plumbing
# --------------------------------------------------------------------------

def _clean(obj):
    """Make ``obj`` JSON-serializable; NaN/inf become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def make_report(command, config, dataset_summary, results, warnings=()):
    return _clean({
        "tool_version": __version__,
        "command": command,
        "config": config,
        "dataset_summary": dataset_summary,
        "results": results,
        "warnings": list(warnings),
    })


def dump_report(report) -> str:
    return json.dumps(report, indent=2) + "\n"


def table_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def reliability_table(stats) -> str:
    """Per-bin reliability-diagram data: RMSE against RMV."""
    return table_text(["bin", "n", "RMV", "RMSE", "zvar", "u_lo", "u_hi"], stats.rows())


def series_table(series, used) -> str:
    rows = [(p.N, p.sqrtN, p.value, p.min_bin_size, int(u)) for p, u in zip(series.points, used)]
    return table_text(["N", "sqrtN", "value", "min_bin_size", "used_in_fit"], rows)


def _write_outputs(out, files):
    """Write all outputs at once, after every computation succeeded."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)


def _guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (InputError, OSError, ValueError) as exc:
            click.echo(f"input error: {exc}", err=True)
            sys.exit(EXIT_INPUT)
        except AnalysisError as exc:
            click.echo(f"analysis error: {exc}", err=True)
            sys.exit(EXIT_ANALYSIS)
    return wrapper


def _policy(ties, seed):
    kind = TIES[ties]
    if kind == "random":
        if seed is None:
            raise InputError("--ties random requires --seed")
        return TiePolicy.random(seed)
    return TiePolicy(kind)


def _metrics(choice):
    return list(MetricKind) if choice == "both" else [MetricKind.parse(choice)]


def _parse_grid(text):
    if text is None:
        return None
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise InputError(f"--grid must be comma-separated integers, got {text!r}") from None


def _load(input_path, schema):
    return load_dataset(input_path, None if schema == "auto" else schema)


def _base_config(command, input_path, schema):
    return {"command": command, "input": str(input_path) if input_path else None,
            "schema": schema, "kernel_backend": BACKEND}


input_option = click.option("--input", "input_path", type=click.Path(dir_okay=False),
                            required=True, help="Delimited table with E,u or R,V,uV columns.")
schema_option = click.option("--schema", type=click.Choice(["auto", "direct", "reference"]),
                             default="auto", show_default=True)
out_option = click.option("--out", type=click.Path(file_okay=False), default="stratcal-out",
                          show_default=True, help="Output directory.")
ties_option = click.option("--ties", type=click.Choice(list(TIES)), default="keep",
                           show_default=True, help="Order of records with equal uncertainty.")
seed_option = click.option("--seed", type=int, default=None, help="Seed for --ties random.")
metric_option = click.option("--metric", type=click.Choice(["ENCE", "ZVE", "both"],
                                                          case_sensitive=False),
                             default="both", show_default=True)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="stratcal")
@click.option("-v", "--verbose", is_flag=True)
def cli(verbose):
    """Calibration diagnostics for regression uncertainties with tied values."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")


@cli.command()
@input_option
@schema_option
@click.option("--tolerance", type=float, default=0.0, show_default=True,
              help="Merge sorted uncertainties whose gap is at most this.")
@out_option
@_guard
def profile(input_path, schema, tolerance, out):
    """Stratification profile of the uncertainties."""
    d = _load(input_path, schema)
    prof = stratification_profile(d, tolerance)
    config = {**_base_config("profile", input_path, schema), "tolerance": tolerance}
    results = {**prof.summary(), "counts_desc": prof.counts_desc}
    report = make_report("profile", config, d.summary(), results)
    _write_outputs(out, {
        "profile.json": dump_report(report),
        "strata.csv": table_text(["value", "count"], prof.strata),
    })
    click.echo(f"M={prof.M} n_unique={prof.n_unique} n_singletons={prof.n_singletons}")


@cli.command()
@input_option
@schema_option
@click.option("--bins", type=int, default=15, show_default=True)
@ties_option
@seed_option
@out_option
@_guard
def diagnose(input_path, schema, bins, ties, seed, out):
    """ENCE, ZVE and reliability table for one bin count and tie policy."""
    d = _load(input_path, schema)
    policy = _policy(ties, seed)
    stats = bin_stats(d, partition(d, bins, policy))
    warnings = []
    results = {"N": bins, "policy": policy.describe(), "ENCE": ence(stats),
               "average_calibration": average_calibration(d).to_dict()}
    try:
        results["ZVE"] = zve(stats)
    except AnalysisError as exc:
        results["ZVE"] = None
        warnings.append(str(exc))
    prof = stratification_profile(d)
    if prof.n_unique < d.size:
        warnings.append(f"{d.size - prof.n_singletons} records share an uncertainty value "
                        f"with another record; binned statistics depend on their order")
    config = {**_base_config("diagnose", input_path, schema), "bins": bins,
              "ties": ties, "seed": seed}
    report = make_report("diagnose", config, d.summary(), results, warnings)
    _write_outputs(out, {"diagnose.json": dump_report(report),
                         "reliability.csv": reliability_table(stats)})
    zve_text = "n/a" if results["ZVE"] is None else f"{results['ZVE']:.4g}"
    click.echo(f"ENCE={results['ENCE']:.4g} ZVE={zve_text}")


@cli.command()
@input_option
@schema_option
@metric_option
@ties_option
@seed_option
@click.option("--grid", default=None, help="Comma-separated bin counts (default: 20 counts "
              "evenly spaced in sqrt(N)).")
@click.option("--grid-min-sqrtn", "sqrtn_min", type=float, default=6.0, show_default=True,
              help="Fit only points with sqrt(N) above this.")
@click.option("--min-bin-size", type=int, default=30, show_default=True)
@out_option
@_guard
def validate(input_path, schema, metric, ties, seed, grid, sqrtn_min, min_bin_size, out):
    """Intercept test: fit the metric against sqrt(N); exit 3 if the CI misses the target."""
    d = _load(input_path, schema)
    policy = _policy(ties, seed)
    grid = _parse_grid(grid) or default_grid(d.size, min_bin_size)
    files, fits = {}, {}
    for m in _metrics(metric):
        s = metric_series(d, policy, m, grid)
        f = fit_intercept(s, sqrtn_min, min_bin_size)
        fits[m.value] = f.to_dict()
        files[f"series_{m.value}.csv"] = series_table(s, s.retained(sqrtn_min, min_bin_size))
    config = {**_base_config("validate", input_path, schema), "metric": metric,
              "ties": ties, "seed": seed, "grid": grid, "grid_min_sqrtn": sqrtn_min,
              "min_bin_size": min_bin_size}
    passed = all(f["verdict"] for f in fits.values())
    report = make_report("validate", config, d.summary(), {"fits": fits, "all_pass": passed})
    files["validate.json"] = dump_report(report)
    _write_outputs(out, files)
    for name, f in fits.items():
        click.echo(f"{name}0={f['intercept']:.4g} CI=[{f['ci_lo']:.4g}, {f['ci_hi']:.4g}] "
                   f"target={f['target']:g} {'PASS' if f['verdict'] else 'FAIL'}")
    if not passed:
        sys.exit(EXIT_VALIDATION_FAILED)


@cli.command("sensitivity")
@input_option
@schema_option
@metric_option
@click.option("--bins", type=int, default=50, show_default=True)
@click.option("--draws", type=int, default=250, show_default=True)
@click.option("--seed", type=int, required=True, help="Master seed (mandatory).")
@click.option("--verdicts/--no-verdicts", default=True, show_default=True,
              help="Also compute intercept-test pass fractions over the draws.")
@click.option("--grid", default=None)
@click.option("--grid-min-sqrtn", "sqrtn_min", type=float, default=6.0, show_default=True)
@click.option("--min-bin-size", type=int, default=30, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@out_option
@_guard
def sensitivity_cmd(input_path, schema, metric, bins, draws, seed, verdicts, grid, sqrtn_min,
                    min_bin_size, threads, out):
    """Monte Carlo over random orderings of tied records."""
    d = _load(input_path, schema)
    grid = _parse_grid(grid) or default_grid(d.size, min_bin_size)
    results, samples = {}, {}
    for m in _metrics(metric):
        rep = sensitivity.mc_metric(d, m, bins, draws, seed, workers=threads)
        entry = {"fixed_N": rep.to_dict()}
        samples[m.value] = rep.samples
        if verdicts:
            vf = sensitivity.mc_verdict_fraction(d, m, grid, sqrtn_min, min_bin_size, draws,
                                                 seed, workers=threads)
            entry["verdicts"] = vf.to_dict()
            samples[f"{m.value}0_pass"] = np.array(
                [np.nan if f is None else float(f.verdict) for f in vf.fits])
        results[m.value] = entry
    # threads only changes the schedule, never the numbers: keep it out of the config
    config = {**_base_config("sensitivity", input_path, schema), "metric": metric,
              "bins": bins, "draws": draws, "seed": seed, "verdicts": verdicts, "grid": grid,
              "grid_min_sqrtn": sqrtn_min, "min_bin_size": min_bin_size}
    warnings = []
    if sensitivity.is_tie_free(d):
        warnings.append("no tied uncertainties: every draw gives the same ordering")
    report = make_report("sensitivity", config, d.summary(), results, warnings)
    cols = list(samples)
    rows = [[k] + [samples[c][k] for c in cols] for k in range(draws)]
    _write_outputs(out, {"sensitivity.json": dump_report(report),
                         "draws.csv": table_text(["draw"] + cols, rows)})
    for name, entry in results.items():
        r = entry["fixed_N"]
        line = f"{name} N={bins}: mean={r['mean']:.4g} sd={r['sd']:.2g}"
        if "verdicts" in entry:
            line += f"  {name}0 pass fraction={entry['verdicts']['pass_fraction']:.3f}"
        click.echo(line)


@cli.group()
def recalibrate():
    """Fit or apply a monotone recalibration of squared uncertainties."""


@recalibrate.command("fit")
@input_option
@schema_option
@click.option("--kind", type=click.Choice(["isotonic", "centered"]), default="centered",
              show_default=True)
@click.option("--model-out", type=click.Path(dir_okay=False), default=None,
              help="Model JSON path (default: <out>/model.json).")
@out_option
@_guard
def recalibrate_fit(input_path, schema, kind, model_out, out):
    """Fit E^2 against u^2 and write the model JSON."""
    d = _load(input_path, schema)
    model = recalibration.fit_dataset(kind, d)
    new_u = recalibration.apply(model, d.uncertainties)
    out_prof = stratification_profile(d.with_uncertainties(new_u)) if np.all(new_u > 0) else None
    results = {"kind": model.kind, "n_knots": model.n_levels,
               "recalibrated_profile": None if out_prof is None else out_prof.summary()}
    config = {**_base_config("recalibrate-fit", input_path, schema), "kind": kind,
              "model_out": model_out}
    report = make_report("recalibrate-fit", config, d.summary(), results)
    model_path = Path(model_out) if model_out else Path(out) / "model.json"
    _write_outputs(out, {"recalibrate-fit.json": dump_report(report)})
    model_path.parent.mkdir(parents=True, exist_ok=True)
    model_path.write_text(model.to_json() + "\n")
    click.echo(f"{model.kind}: {model.n_levels} knots -> {model_path}")


@recalibrate.command("apply")
@input_option
@schema_option
@click.option("--model", "model_path", type=click.Path(dir_okay=False, exists=True),
              required=True)
@out_option
@_guard
def recalibrate_apply(input_path, schema, model_path, out):
    """Apply a model to the uncertainties; writes recalibrated.csv (E,u)."""
    d = _load(input_path, schema)
    model = recalibration.RecalibrationModel.from_json(Path(model_path).read_text())
    new = d.with_uncertainties(recalibration.apply(model, d.uncertainties))
    results = {"kind": model.kind, "profile_before": stratification_profile(d).summary(),
               "profile_after": stratification_profile(new).summary()}
    config = {**_base_config("recalibrate-apply", input_path, schema),
              "model": str(model_path)}
    report = make_report("recalibrate-apply", config, d.summary(), results)
    buf = io.StringIO()
    write_dataset(new, buf)
    _write_outputs(out, {"recalibrate-apply.json": dump_report(report),
                         "recalibrated.csv": buf.getvalue()})


@cli.command()
@click.option("--n", "M", type=int, default=10000, show_default=True)
@click.option("--law", type=click.Choice(["log-uniform", "fixed-levels"]),
              default="log-uniform", show_default=True)
@click.option("--lo", type=float, default=0.01, show_default=True)
@click.option("--hi", type=float, default=1.0, show_default=True)
@click.option("--levels", default=None, help="Comma-separated levels for fixed-levels.")
@click.option("--weights", default=None, help="Comma-separated level weights.")
@click.option("--factor", type=float, default=1.0, show_default=True,
              help="Miscalibration factor c in E = c*u*eps.")
@click.option("--seed", type=int, required=True)
@out_option
@_guard
def synth(M, law, lo, hi, levels, weights, factor, seed, out):
    """Generate a synthetic dataset with known calibration."""
    if law == "log-uniform":
        spec_law = LogUniform(lo, hi)
    else:
        if not levels:
            raise InputError("--law fixed-levels requires --levels")
        spec_law = FixedLevels(tuple(float(v) for v in levels.split(",")),
                               None if not weights else tuple(float(v) for v in weights.split(",")))
    spec = SyntheticSpec(M, spec_law, factor, seed)
    d = generate_synthetic(spec)
    buf = io.StringIO()
    write_dataset(d, buf)
    config = {"command": "synth", **spec.to_dict()}
    report = make_report("synth", config, d.summary(),
                         {"average_calibration": average_calibration(d).to_dict()})
    _write_outputs(out, {"synth.json": dump_report(report), "synthetic.csv": buf.getvalue()})
    click.echo(str(Path(out) / "synthetic.csv"))


def main(argv=None):
    cli.main(args=argv, prog_name="stratcal")


if __name__ == "__main__":
    main()
