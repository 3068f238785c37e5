"""Log-log rate fits and growth-model comparisons."""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from scipy import stats

from shom.errors import FitError
from shom.harness.models import GrowthComparison, RateFit

LOGGER = logging.getLogger(__name__)


def fit_rate(
    abscissae: Sequence[float],
    ordinates: Sequence[float],
    *,
    quantity: str = "",
    window: tuple[float, float] | None = None,
) -> RateFit:
    """Ordinary least squares of log(ordinate) against log(abscissa).

    Points with a non-positive coordinate, or an abscissa outside ``window``,
    are excluded with a logged notice.

    Raises:
        FitError: fewer than three points remain.
    """

    xs = np.asarray(abscissae, dtype=float)
    ys = np.asarray(ordinates, dtype=float)
    if xs.shape != ys.shape:
        raise FitError(f"abscissae and ordinates differ in length ({xs.size} vs {ys.size})")
    kept_x, kept_y, excluded = [], [], []
    for x, y in zip(xs, ys):
        if not (x > 0 and y > 0 and np.isfinite(x) and np.isfinite(y)):
            LOGGER.warning("Excluding non-positive point (%s, %s) from fit %s", x, y, quantity or "<unnamed>")
            excluded.append([float(x), float(y)])
            continue
        if window is not None and not window[0] <= x <= window[1]:
            excluded.append([float(x), float(y)])
            continue
        kept_x.append(x)
        kept_y.append(y)
    if len(kept_x) < 3:
        raise FitError(f"rate fit {quantity or '<unnamed>'} needs at least 3 positive points (got {len(kept_x)})")
    log_x = np.log(kept_x)
    log_y = np.log(kept_y)
    if np.ptp(log_x) == 0:
        raise FitError(f"rate fit {quantity or '<unnamed>'} has a single abscissa")
    result = stats.linregress(log_x, log_y)
    return RateFit(
        quantity=quantity,
        abscissae=log_x.tolist(),
        ordinates=log_y.tolist(),
        slope=float(result.slope),
        intercept=float(result.intercept),
        r_squared=float(result.rvalue**2) if np.isfinite(result.rvalue) else 1.0,
        stderr=float(result.stderr) if np.isfinite(result.stderr) else 0.0,
        window=[float(min(kept_x)), float(max(kept_x))],
        excluded=excluded,
    )


def compare_growth_models(eps: Sequence[float], values: Sequence[float], eta: float = 0.5) -> GrowthComparison:
    """Fit a + b log(1/eps) and c eps^(-eta) by least squares and report both residual norms.

    Raises:
        FitError: fewer than three points.
    """

    e = np.asarray(eps, dtype=float)
    v = np.asarray(values, dtype=float)
    if e.size < 3 or e.size != v.size:
        raise FitError("growth comparison needs at least three matched points")
    design = np.column_stack([np.ones_like(e), np.log(1.0 / e)])
    coefficients, *_ = np.linalg.lstsq(design, v, rcond=None)
    log_residual = float(np.linalg.norm(design @ coefficients - v))
    basis = e ** (-eta)
    scale = float(basis @ v / (basis @ basis))
    power_residual = float(np.linalg.norm(scale * basis - v))
    return GrowthComparison(
        eta=eta,
        log_coefficients=[float(c) for c in coefficients],
        log_residual=log_residual,
        power_coefficient=scale,
        power_residual=power_residual,
    )


def drift(values: Sequence[float]) -> float:
    """max / min of the finite positive values; NaN when fewer than two."""

    data = np.asarray([value for value in values if np.isfinite(value) and value > 0], dtype=float)
    if data.size < 2:
        return float("nan")
    return float(data.max() / data.min())


def halving_factors(values: Sequence[float]) -> list[float]:
    """Ratios of consecutive values along an eps-halving sweep."""

    data = np.asarray(values, dtype=float)
    return [float(a / b) if b != 0 else float("inf") for a, b in zip(data, data[1:])]


__all__ = ["compare_growth_models", "drift", "fit_rate", "halving_factors"]
