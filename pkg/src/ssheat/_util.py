"""Small shared helpers: serialization, canonical JSON, and float tuning."""

from __future__ import annotations

import hashlib
import json
import math
import os
from fractions import Fraction

import numpy as np


def frac_str(q: Fraction) -> str:
    """Serialize an exact rational as "num/den" (or "num" for integers)."""
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def float_str(x: float) -> str:
    """17 significant digits, enough to round-trip a double."""
    return format(float(x), ".17g")


def jsonable(obj):
    """Recursively convert values to a JSON-friendly canonical form."""
    if isinstance(obj, Fraction):
        return frac_str(obj)
    if isinstance(obj, (np.floating, float)):
        return float_str(float(obj))
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def canonical_json(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"))


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SSHEAT_THREADS", "1")))
    except ValueError:
        return 1


def map_jobs(fn, items):
    """Map with optional thread pool (SSHEAT_THREADS), preserving order."""
    n = worker_count()
    items = list(items)
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def log_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log|y| against log x."""
    lx = np.log(x)
    ly = np.log(np.abs(y))
    a, _ = np.polyfit(lx, ly, 1)
    return float(a)
