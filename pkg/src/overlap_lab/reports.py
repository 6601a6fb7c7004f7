"""Deterministic report emission: machine-diffable JSON and a Markdown page.

JSON uses sorted keys and Python's shortest round-trip float formatting, so a
fixed (config, seed) pair produces byte-identical files and reloading a
report reproduces every numeric field exactly.  No timestamps, ever.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import OutputError


def sanitize(obj):
    """Recursively convert numpy scalars/arrays so json can serialize them."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def report_json(report: dict) -> str:
    return json.dumps(sanitize(report), sort_keys=True, indent=2) + "\n"


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_markdown(report: dict) -> str:
    """One-page summary; estimates always show estimand, n, estimate and SE."""
    lines = [f"# overlap-lab report: {report.get('task', 'run')}", ""]
    lines.append(f"- config_hash: `{report.get('config_hash', '')}`")
    lines.append(f"- seed: {report.get('seed', '')}")
    lines.append(f"- version: {report.get('version', '')}")
    lines.append("")

    estimates = report.get("estimates")
    if estimates:
        lines.append("## Causal estimates")
        lines.append("")
        lines.append("| estimand | region | n_subpop | estimate | SE | flags |")
        lines.append("|---|---|---|---|---|---|")
        for est in estimates:
            lines.append(
                "| {estimand} | {region_descriptor} | {n_subpop} | {est} | {se} | {flags} |".format(
                    estimand=est.get("estimand"),
                    region_descriptor=est.get("region_descriptor"),
                    n_subpop=est.get("n_subpop"),
                    est=_fmt(est.get("estimate")),
                    se=_fmt(est.get("se")),
                    flags=",".join(est.get("flags", [])) or "-",
                )
            )
        lines.append("")

    divergence = report.get("divergence")
    if divergence:
        lines.append("## Divergence")
        lines.append("")
        for key in sorted(divergence):
            lines.append(f"- {key}: {_fmt(divergence[key])}")
        if "verdict" in report:
            lines.append(f"- verdict: {report['verdict']}")
        lines.append("")

    phase = report.get("phase_transition")
    if phase:
        lines.append("## Phase-transition statistic")
        lines.append("")
        lines.append(f"- statistic S_J: {_fmt(phase.get('statistic'))}")
        lines.append(f"- growth_ratio: {_fmt(phase.get('growth_ratio'))}")
        if "verdict" in report:
            lines.append(f"- verdict: {report['verdict']} (growth thresholds are finite-sample heuristics)")
        lines.append("")

    outline = report.get("tree_outline")
    if outline:
        lines.append("## Overlap membership tree")
        lines.append("")
        lines.append("```")
        lines.append(outline.rstrip("\n"))
        lines.append("```")
        lines.append("")

    for key in sorted(report):
        if key in {
            "task",
            "config",
            "config_hash",
            "seed",
            "version",
            "estimates",
            "divergence",
            "phase_transition",
            "tree",
            "tree_outline",
            "verdict",
        }:
            continue
        value = report[key]
        if isinstance(value, (dict, list)):
            continue
        lines.append(f"- {key}: {_fmt(value)}")
    lines.append("")
    return "\n".join(lines)


def emit_report(report: dict, out_dir, formats=("json", "markdown")) -> dict:
    """Write report.json / report.md under out_dir; returns written paths."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = {}
        if "json" in formats:
            path = out_dir / "report.json"
            path.write_text(report_json(report), encoding="utf-8")
            written["json"] = str(path)
        if "markdown" in formats:
            path = out_dir / "report.md"
            path.write_text(report_markdown(sanitize(report)), encoding="utf-8")
            written["markdown"] = str(path)
        return written
    except OSError as exc:
        raise OutputError(f"cannot write report under {out_dir}: {exc}") from exc
