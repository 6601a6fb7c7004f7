"""Command-line interface: `overlap-lab <task> --config cfg.toml [--seed N] [--out DIR]`.

Each task reads a TOML config, runs deterministically under the resolved
seed, and writes report.json + report.md into the output directory.  On
failure a JSON error document {"error": <category>, "message": ...} goes to
stderr and the exit code identifies the category.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import load_config, resolve_seed
from .errors import EXIT_CODES, OverlapLabError
from .reports import emit_report
from . import studies


def _run(task_fn, config_path, seed, out, **kwargs):
    try:
        cfg = load_config(config_path)
        run_seed = resolve_seed(cfg, seed)
        out_dir = Path(out) if out else Path(".")
        report = task_fn(cfg, run_seed, out_dir, **kwargs)
        emit_report(report, out_dir)
    except OverlapLabError as exc:
        doc = {"error": exc.category, "message": str(exc)}
        click.echo(json.dumps(doc, sort_keys=True), err=True)
        sys.exit(EXIT_CODES.get(exc.category, 1))


_config_opt = click.option(
    "--config", "config_path", required=True, type=click.Path(), help="TOML config file"
)
_seed_opt = click.option("--seed", type=int, default=None, help="override the config seed")
_out_opt = click.option("--out", type=click.Path(), default=None, help="output directory")


@click.group()
def main():
    """Overlap diagnostics and overlap-robust causal effect estimation."""


@main.command()
@_config_opt
@_seed_opt
@_out_opt
@click.option("--mercer-spec", type=click.Path(), default=None, help="expansion spec file")
def simulate(config_path, seed, out, mercer_spec):
    """Simulate paths from an expansion spec, or run the resolution study."""

    def run(cfg, run_seed, out_dir):
        if mercer_spec is not None:
            cfg.setdefault("simulate", {})["mercer_spec"] = mercer_spec
        return studies.task_simulate(cfg, run_seed, out_dir)

    _run(run, config_path, seed, out)


@main.group()
def diagnose():
    """Overlap diagnostics."""


@diagnose.command()
@_config_opt
@_seed_opt
@_out_opt
@click.option("--eps-b", type=float, default=None, help="orthogonality threshold on the coefficient")
@click.option("--cap-j", type=float, default=None, help="orthogonality threshold on J")
@click.option("--mercer-spec", type=click.Path(), default=None, help="expansion spec file")
def divergence(config_path, seed, out, eps_b, cap_j, mercer_spec):
    """Closed-form divergences and the equivalent/orthogonal verdict."""

    def run(cfg, run_seed, out_dir):
        section = cfg.setdefault("divergence", {})
        if eps_b is not None:
            section["eps_b"] = eps_b
        if cap_j is not None:
            section["cap_j"] = cap_j
        if mercer_spec is not None:
            section["mercer_spec"] = mercer_spec
            section["source"] = "mercer"
        return studies.task_diagnose_divergence(cfg, run_seed, out_dir)

    _run(run, config_path, seed, out)


@diagnose.command("phase-transition")
@_config_opt
@_seed_opt
@_out_opt
def phase_transition(config_path, seed, out):
    """Empirical spectrum and the partial-sum overlap statistic."""
    _run(studies.task_diagnose_phase_transition, config_path, seed, out)


@main.group()
def fit():
    """Propensity model fitting."""


@fit.command()
@_config_opt
@_seed_opt
@_out_opt
def logistic(config_path, seed, out):
    """Logistic propensity model (IRLS)."""
    _run(studies.task_fit_logistic, config_path, seed, out)


@fit.command()
@_config_opt
@_seed_opt
@_out_opt
@click.option("--sigma2", type=float, default=None, help="gaussian kernel scale")
@click.option("--lambda", "lam", type=float, default=None, help="RKHS penalty")
def svm(config_path, seed, out, sigma2, lam):
    """Kernel SVM propensity model (dual solver)."""

    def run(cfg, run_seed, out_dir):
        section = cfg.setdefault("svm", {})
        if sigma2 is not None:
            section["sigma2"] = sigma2
        if lam is not None:
            section["lambda"] = lam
        return studies.task_fit_svm(cfg, run_seed, out_dir)

    _run(run, config_path, seed, out)


@main.group()
def trim():
    """Propensity-score trimming."""


@trim.command()
@_config_opt
@_seed_opt
@_out_opt
def crump(config_path, seed, out):
    """Variance-minimizing trimming region [c*, 1-c*]."""
    _run(studies.task_trim_crump, config_path, seed, out)


@main.command()
@_config_opt
@_seed_opt
@_out_opt
@click.option("--threshold", type=float, default=None, help="margin cut on |f|")
def margin(config_path, seed, out, threshold):
    """SVM margin subpopulation."""
    _run(studies.task_margin, config_path, seed, out, threshold=threshold)


@main.command()
@_config_opt
@_seed_opt
@_out_opt
@click.option("--method", type=click.Choice(["dim", "ipw"]), default=None)
@click.option("--subpop", type=click.Choice(["all", "crump", "margin"]), default=None)
def estimate(config_path, seed, out, method, subpop):
    """Average causal effect on the chosen subpopulation."""

    def run(cfg, run_seed, out_dir):
        section = cfg.setdefault("estimate", {})
        if method is not None:
            section["method"] = method
        if subpop is not None:
            section["subpop"] = subpop
        return studies.task_estimate(cfg, run_seed, out_dir)

    _run(run, config_path, seed, out)


@main.command()
@_config_opt
@_seed_opt
@_out_opt
@click.option("--cc", type=float, default=None, help="cost-complexity pruning parameter")
def explain(config_path, seed, out, cc):
    """Tree explanation of overlap-region membership."""
    _run(studies.task_explain, config_path, seed, out, cc=cc)


@main.command()
@_config_opt
@_seed_opt
@_out_opt
def rhc(config_path, seed, out):
    """Right-heart-catheterization margin reanalysis (user-supplied CSV)."""
    _run(studies.task_rhc, config_path, seed, out)


if __name__ == "__main__":  # pragma: no cover
    main()
