"""Command-line interface.

Subcommands: simulate, fit, predict, cv, complexity, ratefit, experiment.
Feature matrices and responses are headerless CSV; configs are JSON.
Exit codes: 0 success, 1 config/usage error, 2 numeric failure.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from .complexity import Spectrum, effective_dimension, empirical_spectrum, fixed_point, rate_fit, statistical_dimension, complexity_R
from .exceptions import ContractError, DegenerateInputError, NumericError
from .factor import FactorConfig, simulate as simulate_data
from .kernels import GramMatrix, KernelSpec, gram
from .krr import KernelRidge, LossSpec, cross_validate_lambda
from .experiment import ExperimentConfig, run_sweep


def _load_matrix(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=","))


def _load_vector(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",").ravel()


def _kernel_from_option(kernel_json: str) -> KernelSpec:
    return KernelSpec(**json.loads(kernel_json))


@click.group()
def main():
    """Kernel ridge regression on predicted latent factors."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True), help="FactorConfig JSON file")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out-prefix", required=True, help="prefix for <prefix>_X.csv, _Z.csv, _Y.csv")
def simulate(config_path, seed, out_prefix):
    """Draw one sample set from the factor model and export it as CSV."""
    with open(config_path) as fh:
        cfg = FactorConfig.from_dict(json.load(fh))
    simulate_data(cfg, seed).export_csv(out_prefix)
    click.echo(f"wrote {out_prefix}_X.csv, {out_prefix}_Z.csv, {out_prefix}_Y.csv")


@main.command()
@click.option("--features", required=True, type=click.Path(exists=True), help="feature matrix CSV")
@click.option("--response", required=True, type=click.Path(exists=True), help="response vector CSV")
@click.option("--kernel", "kernel_json", default='{"family": "gaussian", "bandwidth": 1.0}', show_default=True)
@click.option("--loss", "loss_json", default='{"kind": "squared"}', show_default=True)
@click.option("--lam", default=0.1, show_default=True, type=float)
@click.option("--out", "out_path", required=True, help="fitted model JSON")
def fit(features, response, kernel_json, loss_json, lam, out_path):
    """Fit a kernel ridge model and store it as JSON."""
    model = KernelRidge(
        kernel=_kernel_from_option(kernel_json), lam=lam, loss=LossSpec(**json.loads(loss_json))
    ).fit(_load_matrix(features), _load_vector(response))
    with open(out_path, "w") as fh:
        fh.write(model.to_json())
    click.echo(f"fitted model written to {out_path}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--features", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True)
def predict(model_path, features, out_path):
    """Predict responses at new feature rows with a stored model."""
    with open(model_path) as fh:
        model = KernelRidge.from_json(fh.read())
    np.savetxt(out_path, model.predict(_load_matrix(features)), delimiter=",")
    click.echo(f"predictions written to {out_path}")


@main.command()
@click.option("--features", required=True, type=click.Path(exists=True))
@click.option("--response", required=True, type=click.Path(exists=True))
@click.option("--kernel", "kernel_json", default='{"family": "gaussian", "bandwidth": 1.0}', show_default=True)
@click.option("--loss", "loss_json", default='{"kind": "squared"}', show_default=True)
@click.option("--grid", default="1e-5,1e-4,1e-3,1e-2,1e-1,1", show_default=True, help="comma-separated lambdas")
@click.option("--folds", default=3, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
def cv(features, response, kernel_json, loss_json, grid, folds, seed):
    """Cross-validate the ridge penalty over a grid."""
    grid_vals = [float(v) for v in grid.split(",")]
    lam, table = cross_validate_lambda(
        _load_matrix(features), _load_vector(response),
        _kernel_from_option(kernel_json), LossSpec(**json.loads(loss_json)),
        grid_vals, folds, seed,
    )
    click.echo("lambda,mean_loss,sd_loss")
    for row in table:
        click.echo(f"{row.lam:g},{row.mean_loss:.10g},{row.sd_loss:.10g}")
    click.echo(f"best lambda: {lam:g}")


def _spectrum_from_options(family, param, scale, gram_csv) -> Spectrum:
    if gram_csv is not None:
        vals = _load_matrix(gram_csv)
        return empirical_spectrum(GramMatrix(vals / vals.shape[0], normalized=True))
    if family == "polynomial":
        return Spectrum.polynomial(alpha=param, c=scale)
    if family == "exponential":
        return Spectrum.exponential(gamma=param, c=scale)
    raise ContractError("need either --gram-csv or --family polynomial|exponential")


@main.command()
@click.option("--family", default=None, help="polynomial or exponential")
@click.option("--param", default=1.0, show_default=True, type=float, help="decay exponent alpha / rate gamma")
@click.option("--scale", default=1.0, show_default=True, type=float)
@click.option("--gram-csv", default=None, type=click.Path(exists=True), help="raw Gram matrix CSV")
@click.option("--n", default=100, show_default=True, type=int)
@click.option("--grid-points", default=25, show_default=True, type=int)
@click.option("--out", "out_path", required=True)
def complexity(family, param, scale, gram_csv, n, grid_points, out_path):
    """Tabulate (delta, R, D, d) over a log grid, plus the critical radius."""
    spec = _spectrum_from_options(family, param, scale, gram_csv)
    hi = spec.values[0]
    deltas = np.logspace(np.log10(hi) - 6, np.log10(hi), grid_points)
    with open(out_path, "w") as fh:
        fh.write("delta,R,D,d\n")
        for d in deltas:
            fh.write(
                f"{d:.10g},{complexity_R(spec, n, d):.10g},"
                f"{effective_dimension(spec, d):.10g},{statistical_dimension(spec, d)}\n"
            )
    fp = fixed_point(spec, n)
    click.echo(f"critical radius: {fp.delta_star:.10g} (residual {fp.residual:.3g})")
    click.echo(f"table written to {out_path}")


@main.command()
@click.option("--family", required=True, help="polynomial or exponential")
@click.option("--param", default=1.0, show_default=True, type=float)
@click.option("--scale", default=1.0, show_default=True, type=float)
@click.option("--n-grid", default="100,1000,10000,100000,1000000", show_default=True)
def ratefit(family, param, scale, n_grid):
    """Fit log delta*(n) vs log n and report the slope."""
    spec = _spectrum_from_options(family, param, scale, None)
    ns = [int(v) for v in n_grid.split(",")]
    res = rate_fit(spec, ns)
    click.echo("n,delta_star")
    for n, d in zip(res.n_grid, res.delta_stars):
        click.echo(f"{int(n)},{d:.10g}")
    click.echo(f"slope: {res.slope:.6g}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True), help="ExperimentConfig JSON")
@click.option("--out-csv", required=True)
@click.option("--out-json", required=True)
@click.option("--jobs", default=None, type=int, help="worker processes (default: LATENTKRR_JOBS or 1)")
def experiment(config_path, out_csv, out_json, jobs):
    """Run a replication sweep and write the aggregated report."""
    with open(config_path) as fh:
        config = ExperimentConfig.from_dict(json.load(fh))
    report = run_sweep(config, n_jobs=jobs)
    report.to_csv(out_csv)
    with open(out_json, "w") as fh:
        json.dump({"config": config.to_dict(), "report": json.loads(report.to_json())}, fh)
    click.echo(f"report written to {out_csv} and {out_json}")


def entry() -> int:
    try:
        main.main(standalone_mode=False)
    except (ContractError, json.JSONDecodeError, click.ClickException, click.UsageError) as exc:
        click.echo(f"config error: {exc}", err=True)
        return 1
    except (NumericError, DegenerateInputError, np.linalg.LinAlgError) as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(entry())
