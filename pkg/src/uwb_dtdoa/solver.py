"""Hyperbolic multilateration and position dilution of precision.

Each measurement is modelled as ``|p - a_i| - |p - m|`` (anchor minus
master range). The tag clock rate factor and the sync bias are not
modelled; the bias shows up as a systematic position error.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dtdoa import DtdoaMeasurement
from .errors import DegenerateError, NoConvergenceError
from .geometry import NetworkGeometry

MAX_COND = 1e12
STEP_TOL = 1e-10
GRAD_TOL = 1e-12
MAX_ITER = 50


@dataclass(frozen=True)
class PositionFix:
    position: np.ndarray
    residual_norm: float
    iterations: int
    covariance: np.ndarray
    pdop: float
    converged: bool = True


def _unit_rows(p: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    diff = p - nodes
    norms = np.hypot(diff[:, 0], diff[:, 1])
    if np.any(norms == 0.0):
        raise DegenerateError("query point coincides with a node")
    return diff / norms[:, None]


def design_matrix(p, anchors: np.ndarray, master: np.ndarray) -> np.ndarray:
    """Rows are gradients of ``|p - a_i| - |p - m|`` with respect to ``p``."""
    p = np.asarray(p, dtype=float)
    return _unit_rows(p, anchors) - _unit_rows(p, master[None, :])


def _model(p: np.ndarray, anchors: np.ndarray, master: np.ndarray) -> np.ndarray:
    d = p - anchors
    return np.hypot(d[:, 0], d[:, 1]) - math.hypot(*(p - master))


def _inverse(normal: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(normal)) or np.linalg.cond(normal) > MAX_COND:
        raise DegenerateError("normal equations are singular")
    return np.linalg.inv(normal)


def _weights(measurements: Sequence[DtdoaMeasurement]) -> np.ndarray:
    var = np.array([m.predicted_variance for m in measurements], dtype=float)
    if np.all(var > 0):
        return 1.0 / var
    return np.ones(len(measurements))


@dataclass
class _Problem:
    anchors: np.ndarray
    master: np.ndarray
    values: np.ndarray
    weights: np.ndarray

    def residual(self, p: np.ndarray) -> np.ndarray:
        return self.values - _model(p, self.anchors, self.master)

    def cost(self, p: np.ndarray) -> float:
        r = self.residual(p)
        return float(np.sum(self.weights * r * r))


def _lm(problem: _Problem, start: np.ndarray, max_iter: int, costs: list | None = None) -> tuple[np.ndarray, int, bool]:
    """Levenberg-Marquardt with diagonal scaling.

    Returns the point, the iteration count and whether a tolerance was met.
    ``costs`` collects the weighted cost after every accepted step.
    """
    p = start.astype(float)
    damping = 1e-3
    cost = problem.cost(p)
    if costs is not None:
        costs.append(cost)
    for it in range(1, max_iter + 1):
        J = design_matrix(p, problem.anchors, problem.master)
        r = problem.residual(p)
        JW = J.T * problem.weights
        normal = JW @ J
        grad = JW @ r
        if np.linalg.norm(grad) < GRAD_TOL:
            return p, it, True
        accepted = False
        while damping < 1e16:
            lhs = normal + damping * np.diag(np.diag(normal))
            try:
                step = np.linalg.solve(lhs, grad)
            except np.linalg.LinAlgError:
                damping *= 10.0
                continue
            trial = p + step
            new_cost = problem.cost(trial)
            if new_cost <= cost:
                accepted = True
                damping = max(damping / 10.0, 1e-12)
                break
            damping *= 10.0
        if not accepted:
            # no descent direction left: already at the floating-point minimum
            return p, it, True
        p, cost = trial, new_cost
        if costs is not None:
            costs.append(cost)
        if np.linalg.norm(step) < STEP_TOL:
            return p, it, True
    return p, max_iter, False


def solve(
    measurements: Sequence[DtdoaMeasurement],
    geometry: NetworkGeometry,
    initial_guess=None,
    multistart: bool = False,
    max_iter: int = MAX_ITER,
) -> PositionFix:
    """Weighted least-squares position from range differences.

    Weights are the inverse predicted variances when all are positive,
    otherwise uniform. The covariance is ``(J^T W J)^-1`` at the solution.
    """
    if len(measurements) < 2:
        raise DegenerateError("at least two range differences are needed for a 2-D fix")
    anchors = np.array([geometry.node(m.anchor_id) for m in measurements])
    problem = _Problem(anchors, np.asarray(geometry.master), np.array([m.value for m in measurements]), _weights(measurements))

    centroid = np.vstack([geometry.anchors, geometry.master[None, :]]).mean(axis=0)
    start = centroid if initial_guess is None else np.asarray(initial_guess, dtype=float)
    starts = [start]
    if multistart:
        scale = float(np.ptp(geometry.anchors, axis=0).max()) / 4.0
        starts += [start + scale * np.array(d) for d in ((1, 0), (-1, 0), (0, 1), (0, -1))]

    best = None
    for s in starts:
        p, iters, ok = _lm(problem, s, max_iter)
        cost = problem.cost(p)
        if best is None or (ok and not best[2]) or (ok == best[2] and cost < best[3]):
            best = (p, iters, ok, cost)
    p, iters, ok, _ = best
    if not ok:
        raise NoConvergenceError(f"no convergence after {max_iter} iterations")

    J = design_matrix(p, anchors, problem.master)
    cov = _inverse((J.T * problem.weights) @ J)
    cov = 0.5 * (cov + cov.T)
    return PositionFix(
        position=p,
        residual_norm=float(np.linalg.norm(problem.residual(p))),
        iterations=iters,
        covariance=cov,
        pdop=float(math.sqrt(np.trace(_inverse(J.T @ J)))),
        converged=True,
    )


def pdop(geometry: NetworkGeometry, query) -> float:
    H = design_matrix(query, geometry.anchors, np.asarray(geometry.master))
    return float(math.sqrt(np.trace(_inverse(H.T @ H))))


def condition(geometry: NetworkGeometry, query) -> float:
    H = design_matrix(query, geometry.anchors, np.asarray(geometry.master))
    return float(np.linalg.cond(H.T @ H))


@dataclass(frozen=True)
class PdopMap:
    xs: np.ndarray
    ys: np.ndarray
    grid: np.ndarray
    """Row ``r`` is ``ys[r]``, column ``c`` is ``xs[c]``; NaN marks singular cells."""

    def to_csv(self, header: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x_m", "y_m", "pdop"])
        for r, y in enumerate(self.ys):
            for c, x in enumerate(self.xs):
                v = self.grid[r, c]
                w.writerow([f"{x:.16e}", f"{y:.16e}", f"{v:.16e}" if math.isfinite(v) else "nan"])
        return buf.getvalue()


def _centers(lo: float, hi: float, resolution: float) -> np.ndarray:
    count = max(1, int(round((hi - lo) / resolution)))
    step = (hi - lo) / count
    return lo + step * (np.arange(count) + 0.5)


def pdop_map(geometry: NetworkGeometry, bounds: tuple[float, float, float, float], resolution: float) -> PdopMap:
    """PDoP at cell centers over ``(xmin, xmax, ymin, ymax)``."""
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    xmin, xmax, ymin, ymax = bounds
    if xmax < xmin or ymax < ymin:
        raise ValueError("empty bounds")
    xs, ys = _centers(xmin, xmax, resolution), _centers(ymin, ymax, resolution)
    grid = np.full((len(ys), len(xs)), np.nan)
    for r, y in enumerate(ys):
        for c, x in enumerate(xs):
            try:
                grid[r, c] = pdop(geometry, (x, y))
            except DegenerateError:
                pass
    return PdopMap(xs, ys, grid)


def fix_csv_row(fix: PositionFix) -> list[str]:
    c = fix.covariance
    return [
        f"{fix.position[0]:.16e}", f"{fix.position[1]:.16e}", f"{fix.residual_norm:.16e}", str(fix.iterations),
        f"{c[0, 0]:.16e}", f"{c[0, 1]:.16e}", f"{c[1, 1]:.16e}", f"{fix.pdop:.16e}", str(int(fix.converged)),
    ]


FIX_COLUMNS = ("x_m", "y_m", "residual_norm_m", "iterations", "cov_xx_m2", "cov_xy_m2", "cov_yy_m2", "pdop", "converged")
