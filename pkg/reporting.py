"""
Reporting Module
Check tables, convergence tables and report emission in json, csv, text and pdf
"""
import json
import logging
from typing import List

import pandas as pd

from settings import CSV_COLUMNS, REPORT_FORMATS
from utils import format_float, format_residual, json_safe, pass_mark

logger = logging.getLogger(__name__)


def checks_dataframe(report) -> pd.DataFrame:
    """One row per check in catalog order"""
    rows = [
        {
            "identity_id": c.identity_id,
            "sup_residual": c.sup_residual,
            "mean_residual": c.mean_residual,
            "tolerance": c.tolerance,
            "convergence_order": c.convergence_order,
            "masked_fraction": c.masked_fraction,
            "hypothesis_ok": c.hypothesis_ok,
            "pass": bool(c.passed),
            "message": c.message,
        }
        for c in report.checks
    ]
    columns = ["identity_id", "sup_residual", "mean_residual", "tolerance", "convergence_order",
               "masked_fraction", "hypothesis_ok", "pass", "message"]
    return pd.DataFrame(rows, columns=columns)


def convergence_table(report) -> pd.DataFrame:
    """Checks with a measured convergence order, for external plotting"""
    df = checks_dataframe(report)
    return df.loc[df["convergence_order"].notna(), ["identity_id", "sup_residual", "convergence_order"]]


def probe_table(report) -> pd.DataFrame:
    """Resolution ladder of a probe run; empty for other solver tasks"""
    levels = (report.solver or {}).get("levels") or []
    return pd.DataFrame(levels, columns=["size", "basis_size", "min_singular_value", "kernel_dim", "gram_condition"])


def report_json(report) -> str:
    return json.dumps(json_safe(report.to_dict()), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def report_csv(report) -> str:
    """Fixed header; floats as shortest round-trip decimals, missing values empty"""
    df = checks_dataframe(report)[CSV_COLUMNS].copy()
    for column in ("sup_residual", "mean_residual"):
        df[column] = df[column].map(format_float)
    df["pass"] = df["pass"].map(lambda p: "true" if p else "false")
    return df.to_csv(index=False, lineterminator="\n")


def report_text(report) -> str:
    """Human summary with pass marks"""
    scenario = report.scenario
    lines: List[str] = [
        f"Scenario: {scenario.get('name')} (seed {scenario.get('seed')})",
        f"Model: {scenario.get('model', {}).get('name')}  Density: {scenario.get('density', {}).get('preset')}",
        "",
    ]
    if report.checks:
        lines.append("Checks:")
        for c in report.checks:
            line = f"  {pass_mark(c.passed)} {c.identity_id:<22} sup {format_residual(c.sup_residual)}" \
                   f"  tol {format_residual(c.tolerance)}"
            if c.convergence_order is not None:
                line += f"  order {c.convergence_order:.2f}"
            if not c.hypothesis_ok:
                line += "  (hypothesis not met)"
            if c.message:
                line += f"  [{c.message}]"
            lines.append(line)
    else:
        lines.append("Checks: none")
    if report.solver is not None:
        solver = report.solver
        lines.append("")
        lines.append(f"Solver: {pass_mark(solver.get('pass', True))} {solver.get('task')} ({solver.get('basis')})")
        if solver.get("eigenvalues") is not None:
            lines.append("  eigenvalues: " + ", ".join(format_residual(s) for s in solver["eigenvalues"]))
        if solver.get("kernel_dim") is not None:
            lines.append(f"  kernel dimension: {solver['kernel_dim']}")
        if solver.get("oracle_gap") is not None:
            lines.append(f"  dense oracle gap: {format_residual(solver['oracle_gap'])}")
        if solver.get("max_principal_angle") is not None:
            lines.append(f"  max principal angle to {' '.join(solver['expected_span'])}: "
                         f"{format_residual(solver['max_principal_angle'])}")
        if solver.get("min_singular_value") is not None:
            lines.append(f"  min singular value: {format_residual(solver['min_singular_value'])}")
        if solver.get("message"):
            lines.append(f"  {solver['message']}")
    if report.numeric_failure:
        lines.append("")
        lines.append(f"Numeric failure: {report.numeric_failure}")
    if report.wall_ms is not None:
        lines.append(f"Wall time: {report.wall_ms:.1f} ms")
    lines.append("")
    lines.append(f"Result: {pass_mark(report.passed)} {'PASS' if report.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def emit(report, fmt: str = "json", config=None) -> bytes:
    """Serialize a run report; pdf goes through the print manager"""
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"Unknown report format '{fmt}'. Valid formats: {', '.join(REPORT_FORMATS)}")
    if fmt == "pdf":
        from config_loader import get_config
        from print_manager import PrintManager
        return PrintManager(config or get_config()).generate_run_pdf(report).getvalue()
    text = {"json": report_json, "csv": report_csv, "text": report_text}[fmt](report)
    logger.debug(f"Emitted {fmt} report of {len(report.checks)} checks")
    return text.encode("utf-8")
