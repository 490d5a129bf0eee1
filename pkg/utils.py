"""
Utility functions for the weighted geometry verification toolkit
"""
import math
from datetime import datetime
from typing import Optional

import numpy as np

from settings import FAIL_MARK, PASS_MARK


def format_float(value: Optional[float]) -> str:
    """
    Format a float as its shortest round-trip decimal

    Args:
        value: The number to format

    Returns:
        repr-style decimal, or an empty string for None and non-finite values
    """
    if value is None:
        return ""
    value = float(value)
    if not math.isfinite(value):
        return ""
    return repr(value)


def format_residual(value: Optional[float]) -> str:
    """Short scientific notation for text summaries, 'N/A' if missing"""
    if value is None:
        return "N/A"
    value = float(value)
    if not math.isfinite(value):
        return "N/A"
    return f"{value:.3e}"


def pass_mark(passed: bool) -> str:
    """Pass/fail mark for text output"""
    return PASS_MARK if passed else FAIL_MARK


def json_safe(value):
    """
    Convert a report payload into plain JSON types

    numpy scalars and arrays become Python numbers and lists; NaN and
    infinities become None so the output stays strict JSON.
    """
    if isinstance(value, dict):
        return {str(key): json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(item) for item in value]
    if isinstance(value, np.ndarray):
        return [json_safe(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def relative_gap(lhs: float, rhs: float) -> float:
    """|lhs - rhs| / (1 + |rhs|)"""
    return abs(lhs - rhs) / (1.0 + abs(rhs))


def format_datetime(datetime_obj: Optional[datetime]) -> str:
    """
    Format a datetime object for ledger and PDF headers

    Args:
        datetime_obj: The datetime object to format

    Returns:
        Formatted datetime string, or 'N/A' if datetime_obj is None
    """
    if datetime_obj is None:
        return "N/A"
    return datetime_obj.strftime('%d/%m/%Y %H:%M:%S')
