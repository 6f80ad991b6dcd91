from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .value import Value, backward

ScalarFn = Callable[[Value], Value]


@dataclass
class GradcheckReport:
    max_rel_err: float
    max_abs_err: float
    passed: bool
    checked: int
    message: str = ""


def numeric_grad(f: ScalarFn, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of ``x``."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        saved = x[idx]
        x[idx] = saved + step
        plus = f(Value(x.copy())).item()
        x[idx] = saved - step
        minus = f(Value(x.copy())).item()
        x[idx] = saved
        grad[idx] = (plus - minus) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / denom


def gradcheck(
    f: ScalarFn,
    x: Value | np.ndarray,
    step: float = 1e-5,
    tol: float = 1e-4,
    *,
    atol: float = 0.0,
) -> GradcheckReport:
    """Compare reverse-mode gradients of ``f`` at ``x`` against central differences.

    An entry passes when its relative error is within ``tol`` or its absolute
    error is within ``atol``. Non-finite evaluations produce a failed report.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    base = np.array(x.data if isinstance(x, Value) else x, dtype=np.float64)
    leaf = Value(base.copy(), requires_grad=True)
    out = f(leaf)
    if out.size != 1:
        raise ValueError(f"gradcheck needs a scalar function, got output shape {out.shape}")
    if not np.all(np.isfinite(out.data)):
        return GradcheckReport(float("nan"), float("nan"), False, 0, "f(x) is not finite")
    backward(out)
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(base)

    with np.errstate(all="ignore"):
        numeric = numeric_grad(f, base, step)
    if not np.all(np.isfinite(numeric)):
        bad = int(np.count_nonzero(~np.isfinite(numeric)))
        return GradcheckReport(float("nan"), float("nan"), False, base.size, f"{bad} finite-difference entries are not finite")
    if not np.all(np.isfinite(analytic)):
        return GradcheckReport(float("nan"), float("nan"), False, base.size, "analytic gradient is not finite")

    abs_err = np.abs(analytic - numeric)
    rel_err = relative_error(analytic, numeric)
    ok = (rel_err <= tol) | (abs_err <= atol)
    max_rel = float(rel_err.max()) if rel_err.size else 0.0
    max_abs = float(abs_err.max()) if abs_err.size else 0.0
    message = "" if ok.all() else f"{int((~ok).sum())} of {ok.size} entries exceed tolerance"
    return GradcheckReport(max_rel, max_abs, bool(ok.all()), int(base.size), message)


__all__ = ["GradcheckReport", "gradcheck", "numeric_grad", "relative_error"]
