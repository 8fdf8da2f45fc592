"""Command-line front end.

Exit codes are a stable contract: 0 success, 2 input/validation error,
1 internal error. Every output file embeds the effective configuration
(seed, quantiles, encoding, package version). All randomness derives from
one --seed flag (default from the KA_SEED environment variable).
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .dataset import (
    Variation,
    align,
    load_feature_matrix,
    load_labels,
    load_manifest,
    save_feature_matrix,
    save_labels,
    save_manifest,
)
from .errors import ValidationError
from .extrapolation import fit_saturation_points, subsample_sites_auc
from .kernel import ENCODINGS, evaluate_dataset
from .neural import PreprocConfig, ZeroVariancePolicy, build_neural_features, load_repetition_table
from .plotting import CurveSeries, render_curves_svg
from .protocol import LevelResult, ProtocolReport, compare, make_subsets, merge_reports, run_protocol
from .search import ParamSpace, SearchRecord, make_demo_evaluator, random_search, select_top, transfer_correlation
from .synth import SynthSpec, generate


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def handle_errors(func):
    """Map contract violations to exit 2 and anything else to exit 1."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ValidationError as exc:
            _fail(str(exc), 2)
        except click.ClickException:
            raise
        except (SystemExit, KeyboardInterrupt):
            raise
        except Exception as exc:  # noqa: BLE001 - boundary of the process
            _fail(f"internal error: {exc}", 1)

    return wrapper


def _parse_quantiles(text: str) -> tuple:
    try:
        qs = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ValidationError(f"could not parse quantiles {text!r}") from None
    if not qs:
        raise ValidationError("no quantiles given")
    return qs


def _parse_grid(text: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ValidationError(f"could not parse site-count grid {text!r}") from None


def _config(command: str, seed: int, quantiles, encoding: str, **extra) -> dict:
    doc = {
        "command": command,
        "version": __version__,
        "seed": int(seed),
        "quantiles": list(quantiles),
        "encoding": encoding,
    }
    doc.update(extra)
    return doc


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc) + "\n", encoding="utf-8")


def _write_curve_csv(path: Path, result, config: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    curve = result.curve
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("# " + json.dumps(config) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["d", "d_over_D", "e_d", "accuracy", "argmin_sigma"])
        complexity = curve.complexity
        for d in range(curve.total_dims + 1):
            writer.writerow([
                d,
                repr(float(complexity[d])),
                repr(float(curve.loss[d])),
                repr(float(curve.accuracy[d])),
                repr(float(curve.argmin_sigma[d])),
            ])


def _load_curve_csv(path: Path) -> tuple:
    if not path.exists():
        raise ValidationError(f"curve file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or rows[0][:4] != ["d", "d_over_D", "e_d", "accuracy"]:
        raise ValidationError(f"malformed curve CSV {path}: unexpected header")
    try:
        x = np.array([float(r[1]) for r in rows[1:]])
        y = np.array([float(r[3]) for r in rows[1:]])
    except (ValueError, IndexError):
        raise ValidationError(f"malformed curve CSV {path}: bad data row") from None
    if x.size < 2:
        raise ValidationError(f"curve CSV {path} has fewer than 2 points")
    return x, y


def _report_from_dict(doc: dict) -> ProtocolReport:
    levels = {}
    for name, lev in doc["levels"].items():
        env = lev["envelope"]
        levels[name] = LevelResult(
            level=lev["level"],
            auc_per_subset=tuple(lev["auc_per_subset"]),
            auc_mean=lev["auc_mean"],
            auc_std=lev["auc_std"],
            envelope_grid=np.asarray(env["grid"]),
            envelope_min=np.asarray(env["min"]),
            envelope_max=np.asarray(env["max"]),
            envelope_mean=np.asarray(env["mean"]),
            curves=(),
            subset_size=lev["subset_size"],
            n=lev["n"],
            k=lev["k"],
        )
    return ProtocolReport(
        levels=levels,
        seed=doc["seed"],
        quantiles=tuple(doc["quantiles"]),
        n_subsets=doc["n_subsets"],
        fraction=doc["fraction"],
        encoding=doc["encoding"],
    )


def _load_report(path: Path) -> ProtocolReport:
    if not path.exists():
        raise ValidationError(f"report not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        return _report_from_dict(doc)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValidationError(f"malformed protocol report {path}: {exc}") from None


seed_option = click.option("--seed", type=int, default=0, envvar="KA_SEED",
                           show_default=True, help="Master seed (env: KA_SEED).")
quantiles_option = click.option("--quantiles", default="0.1,0.5,0.9", show_default=True,
                                help="Distance quantiles for bandwidth candidates.")
encoding_option = click.option("--encoding", type=click.Choice(ENCODINGS),
                               default="standardized", show_default=True,
                               help="Label matrix encoding.")
workers_option = click.option("--workers", type=int, default=1, show_default=True,
                              help="Parallel workers (outputs are worker-count independent).")


@click.group()
@click.version_option(__version__)
def cli():
    """Score feature representations by kernel analysis."""


@cli.command("eval")
@click.option("--features", "features_path", required=True, type=click.Path(path_type=Path))
@click.option("--labels", "labels_path", required=True, type=click.Path(path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["auto", "csv", "binary"]),
              default="auto", show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path),
              help="Output directory for curve.csv and summary.json.")
@click.option("--center", is_flag=True, help="Double-center the kernel matrix first.")
@seed_option
@quantiles_option
@encoding_option
@handle_errors
def cmd_eval(features_path, labels_path, fmt, out_dir, center, seed, quantiles, encoding):
    """Compute one kernel-analysis curve and its AUC."""
    qs = _parse_quantiles(quantiles)
    fs = load_feature_matrix(features_path, fmt)
    lf = load_labels(labels_path)
    ad = align(fs, lf)
    result = evaluate_dataset(ad, quantiles=qs, encoding=encoding, center=center)
    config = _config("eval", seed, qs, encoding, center=center,
                     features=str(features_path), labels=str(labels_path))
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_curve_csv(out_dir / "curve.csv", result, config)
    _write_json(out_dir / "summary.json", {
        "auc": result.auc,
        "sigmas": list(result.sigmas),
        "n": result.n,
        "k": result.k,
        "config": config,
    })
    click.echo(f"auc {result.auc:.6f} (n={result.n}, k={result.k})")


@cli.command("protocol")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(path_type=Path))
@click.option("--subsets", "n_subsets", type=int, default=10, show_default=True)
@click.option("--fraction", type=float, default=0.8, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path),
              help="Output report JSON path.")
@seed_option
@quantiles_option
@encoding_option
@workers_option
@handle_errors
def cmd_protocol(manifest_path, n_subsets, fraction, out_path, seed, quantiles,
                 encoding, workers):
    """Run the seeded subset protocol over every level in a manifest."""
    qs = _parse_quantiles(quantiles)
    manifest = load_manifest(manifest_path)
    labels = load_labels(manifest.label_path)
    reports = []
    for entry in manifest.entries:
        fs = load_feature_matrix(entry.path, entry.fmt, variation=entry.level)
        ad = align(fs, labels)
        subsets = make_subsets(ad, n_subsets=n_subsets, fraction=fraction, seed=seed)
        reports.append(run_protocol(ad, subsets, quantiles=qs, encoding=encoding,
                                    workers=workers))
    merged = merge_reports(reports)
    doc = merged.to_dict()
    doc["config"] = _config("protocol", seed, qs, encoding, subsets=n_subsets,
                            fraction=fraction, manifest=str(manifest_path))
    _write_json(out_path, doc)
    for name in sorted(merged.levels):
        res = merged.levels[name]
        click.echo(f"{name}: auc {res.auc_mean:.6f} (std {res.auc_std:.2e}, "
                   f"{len(res.auc_per_subset)} subsets)")


@cli.command("compare")
@click.option("--a", "path_a", required=True, type=click.Path(path_type=Path))
@click.option("--b", "path_b", required=True, type=click.Path(path_type=Path))
@click.option("--level", required=True)
@click.option("--permutations", type=int, default=10_000, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None)
@seed_option
@handle_errors
def cmd_compare(path_a, path_b, level, permutations, out_path, seed):
    """Paired sign-flip comparison of two protocol reports at one level."""
    rep_a, rep_b = _load_report(path_a), _load_report(path_b)
    result = compare(rep_a, rep_b, level, n_permutations=permutations, seed=seed)
    doc = result.to_dict()
    doc["config"] = _config("compare", seed, (), "n/a", a=str(path_a), b=str(path_b),
                            permutations=permutations)
    if out_path is not None:
        _write_json(out_path, doc)
    click.echo(json.dumps(result.to_dict()))


@cli.command("neural")
@click.option("--spikes", "spikes_path", required=True, type=click.Path(path_type=Path))
@click.option("--variation", type=click.Choice([v.value for v in Variation]),
              required=True)
@click.option("--splits", type=int, default=3, show_default=True,
              help="Repetition sets per block for Low variation.")
@click.option("--policy", type=click.Choice([p.value for p in ZeroVariancePolicy]),
              default="error", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path),
              help="Output feature file (.csv or .f64).")
@seed_option
@handle_errors
def cmd_neural(spikes_path, variation, splits, policy, out_path, seed):
    """Normalize repetition-level spike counts into a feature matrix."""
    table = load_repetition_table(spikes_path)
    cfg = PreprocConfig(variation=Variation.parse(variation), low_splits=splits,
                        zero_variance=ZeroVariancePolicy.parse(policy))
    fs = build_neural_features(table, cfg)
    config = _config("neural", seed, (), "n/a", variation=variation, splits=splits,
                     policy=policy, spikes=str(spikes_path))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_feature_matrix(fs, out_path, config=config)
    click.echo(f"wrote {fs.n} images x {fs.p} sites to {out_path}")


@cli.command("extrapolate")
@click.option("--features", "features_path", type=click.Path(path_type=Path))
@click.option("--labels", "labels_path", type=click.Path(path_type=Path))
@click.option("--grid", default=None, help="Comma-separated site counts, e.g. 8,16,32.")
@click.option("--repeats", type=int, default=3, show_default=True)
@click.option("--points", "points_path", type=click.Path(path_type=Path), default=None,
              help="CSV of t,auc pairs to fit directly (skips subsampling).")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@seed_option
@quantiles_option
@encoding_option
@handle_errors
def cmd_extrapolate(features_path, labels_path, grid, repeats, points_path, out_dir,
                    seed, quantiles, encoding):
    """Sample KA-AUC versus site count and fit the saturation model."""
    qs = _parse_quantiles(quantiles)
    out_dir.mkdir(parents=True, exist_ok=True)
    if points_path is not None:
        t_values, auc_values = _load_points_csv(points_path)
        fit = fit_saturation_points(t_values, auc_values)
        config = _config("extrapolate", seed, qs, encoding, points=str(points_path))
    else:
        if features_path is None or labels_path is None or grid is None:
            raise ValidationError(
                "either --points or all of --features/--labels/--grid are required"
            )
        t_grid = _parse_grid(grid)
        fs = load_feature_matrix(features_path)
        ad = align(fs, load_labels(labels_path))
        curve = subsample_sites_auc(ad, t_grid, repeats, seed=seed, quantiles=qs,
                                    encoding=encoding)
        fit = fit_saturation_points(curve.t, curve.mean_auc)
        config = _config("extrapolate", seed, qs, encoding, grid=list(t_grid),
                         repeats=repeats, features=str(features_path))
        with (out_dir / "sampling.csv").open("w", newline="", encoding="utf-8") as fh:
            fh.write("# " + json.dumps(config) + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "mean_auc", "std_auc"])
            for t, m, s in zip(curve.t, curve.mean_auc, curve.std_auc):
                writer.writerow([t, repr(m), repr(s)])
        _write_json(out_dir / "sampling.json", {**curve.to_dict(), "config": config})
    _write_json(out_dir / "fit.json", {**fit.to_dict(), "config": config})
    click.echo(f"asymptote a = {fit.a:.4f} (rss {fit.rss:.3e}, "
               f"converged={fit.converged})")


def _load_points_csv(path: Path) -> tuple:
    if not path.exists():
        raise ValidationError(f"points file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or [c.strip() for c in rows[0][:2]] != ["t", "auc"]:
        raise ValidationError(f"malformed points CSV {path}: expected header 't,auc'")
    try:
        t = [float(r[0]) for r in rows[1:]]
        auc = [float(r[1]) for r in rows[1:]]
    except (ValueError, IndexError):
        raise ValidationError(f"malformed points CSV {path}: bad data row") from None
    return t, auc


@cli.command("synth")
@click.option("--kind", type=click.Choice(["onehot", "clusters", "noise"]), required=True)
@click.option("--k", type=int, default=7, show_default=True)
@click.option("--n-per-class", type=int, default=10, show_default=True)
@click.option("--p", type=int, default=8, show_default=True)
@click.option("--noise", type=float, default=0.0, show_default=True)
@click.option("--separation", type=float, default=1.0, show_default=True)
@click.option("--variation", type=click.Choice([v.value for v in Variation]),
              default="Unspecified", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "binary"]), default="csv",
              show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@seed_option
@handle_errors
def cmd_synth(kind, k, n_per_class, p, noise, separation, variation, fmt, out_dir, seed):
    """Generate a synthetic dataset (features, labels, manifest)."""
    spec = SynthSpec(kind=kind, k=k, n_per_class=n_per_class,
                     p=max(p, k) if kind == "onehot" else p,
                     noise=noise, separation=separation, seed=seed,
                     variation=Variation.parse(variation))
    fs, lf = generate(spec)
    config = _config("synth", seed, (), "n/a", kind=kind, k=k, n_per_class=n_per_class,
                     p=spec.p, noise=noise, separation=separation, variation=variation)
    out_dir.mkdir(parents=True, exist_ok=True)
    feature_file = "features.f64" if fmt == "binary" else "features.csv"
    save_feature_matrix(fs, out_dir / feature_file, config=config)
    save_labels(lf, out_dir / "labels.csv", config=config)
    save_manifest(out_dir / "manifest.json", name=f"synth-{kind}", label_file="labels.csv",
                  entries=[{"level": variation, "path": feature_file, "format": fmt}],
                  seed=seed, config=config)
    click.echo(f"wrote {fs.n} x {fs.p} {kind} dataset to {out_dir}")


@cli.command("search")
@click.option("--space", "space_path", required=True, type=click.Path(path_type=Path))
@click.option("--n", "n_draws", type=int, required=True)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path),
              help="JSON-lines records file.")
@click.option("--resume", is_flag=True, help="Skip draw indices already in the file.")
@seed_option
@quantiles_option
@encoding_option
@workers_option
@handle_errors
def cmd_search(space_path, n_draws, out_path, resume, seed, quantiles, encoding, workers):
    """Random search over the built-in synthetic family."""
    qs = _parse_quantiles(quantiles)
    if not space_path.exists():
        raise ValidationError(f"space file not found: {space_path}")
    try:
        space = ParamSpace.from_dict(json.loads(space_path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValidationError(f"malformed space file {space_path}: {exc}") from None
    config = _config("search", seed, qs, encoding, space=str(space_path), n=n_draws)
    done: set = set()
    existing: list = []
    if resume and out_path.exists():
        for line in out_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError:
                break  # truncated tail from an interrupted run; redo from here
            if "config" in doc and "draw" not in doc:
                continue
            existing.append(SearchRecord.from_dict(doc))
            done.add(existing[-1].draw)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    evaluator = make_demo_evaluator(family_seed=seed)
    # rewrite from scratch (so an interrupted run's partial line cannot
    # linger), interleaving kept records with new ones in draw order
    kept = sorted(existing, key=lambda r: r.draw)
    with out_path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"config": config}) + "\n")
        state = {"next": 0}

        def flush_kept(before: int | None) -> None:
            while state["next"] < len(kept) and (
                before is None or kept[state["next"]].draw < before
            ):
                fh.write(json.dumps(kept[state["next"]].to_dict()) + "\n")
                state["next"] += 1

        def sink(record: SearchRecord) -> None:
            flush_kept(record.draw)
            fh.write(json.dumps(record.to_dict()) + "\n")
            fh.flush()

        new_records = random_search(space, evaluator, n_draws, seed=seed, quantiles=qs,
                                    encoding=encoding, workers=workers, skip=done,
                                    sink=sink)
        flush_kept(None)
    records = sorted(existing + new_records, key=lambda r: r.draw)
    ok = [r for r in records if r.status == "ok"]
    click.echo(f"{len(records)} records ({len(ok)} ok)")
    if ok:
        top = select_top(records)
        click.echo(f"top draw {top.draw}: train auc {top.train_auc:.4f} "
                   f"params {json.dumps(top.params)}")
        levels = sorted({lvl for r in ok for lvl in r.test_auc})
        for level in levels:
            try:
                r = transfer_correlation(records, level)
                click.echo(f"transfer r[{level}] = {r:.3f}")
            except ValidationError:
                pass


@cli.command("plot")
@click.argument("inputs", nargs=-1, type=click.Path(path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--title", default="")
@seed_option
@handle_errors
def cmd_plot(inputs, out_path, title, seed):
    """Render curve CSVs and/or protocol reports to one SVG."""
    if not inputs:
        raise ValidationError("no curve files given")
    series = []
    for path in inputs:
        if path.suffix == ".json":
            report = _load_report(path)
            for name in sorted(report.levels):
                res = report.levels[name]
                series.append(CurveSeries(
                    name=f"{path.stem}:{name}",
                    x=res.envelope_grid,
                    y=res.envelope_mean,
                    band_low=res.envelope_min,
                    band_high=res.envelope_max,
                ))
        else:
            x, y = _load_curve_csv(path)
            series.append(CurveSeries(name=path.stem, x=x, y=y))
    config = _config("plot", seed, (), "n/a", inputs=[str(p) for p in inputs])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(render_curves_svg(series, config=config, title=title),
                        encoding="utf-8")
    click.echo(f"wrote {out_path}")


def main():
    cli(prog_name="kaeval")


if __name__ == "__main__":
    main()
