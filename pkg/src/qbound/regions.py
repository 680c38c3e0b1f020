"""Accessible-region reconstruction by sweeping probe configurations and weights.

Each weight pair defines a straight-line bound in the (v_x, v_y) plane; its
tangency point with the accessible region is the gradient of the bound with
respect to the weights, computed here by central finite differences.  The
lower-left boundary of a probe's region is the collection of tangency points
over a weight grid, and the envelope over all probe configurations
reconstructs the analytic sensitivity limit.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import closed_forms
from .gaussian import ProbeConfig, build_probe
from .holevo import batch_bound

FD_RELATIVE_STEP = 1e-5
ENVELOPE_BINS = 400

SOURCE_NUMERIC = "numeric-solver"
SOURCE_CLOSED_FORM = "closed-form"


@dataclass(frozen=True)
class RegionSample:
    """One boundary point with the configuration that generated it."""

    v_x: float
    v_y: float
    source: str
    t: float | None = None
    phi1: float | None = None
    w_ratio: float | None = None
    segment: str | None = None
    converged: bool = True


@dataclass(frozen=True)
class SqlFeasibility:
    feasible: bool
    witness_v_x: float | None = None
    witness_v_y: float | None = None


def _n_threads() -> int:
    env = os.environ.get("QBOUND_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"QBOUND_THREADS must be an integer, got {env!r}") from None
    return min(4, os.cpu_count() or 1)


def _chunked_batch_bound(cov_rows: np.ndarray, w_x: np.ndarray, w_y: np.ndarray) -> np.ndarray:
    """batch_bound split across threads; chunk layout is fixed, so the
    concatenated result does not depend on the worker count."""
    n = w_x.size
    threads = _n_threads()
    if threads == 1 or n < 4096:
        return batch_bound(cov_rows, w_x, w_y)
    bounds = np.linspace(0, n, threads + 1, dtype=int)
    chunks = [(cov_rows if cov_rows.ndim == 2 else cov_rows[lo:hi], w_x[lo:hi], w_y[lo:hi])
              for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda args: batch_bound(*args), chunks))
    return np.concatenate(parts)


def _ratio_weights(ratios: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalized weights (w_x, w_y) with w_x / w_y equal to each ratio."""
    ratios = np.asarray(ratios, dtype=float)
    if np.any(ratios <= 0.0) or not np.all(np.isfinite(ratios)):
        raise ValueError("weight ratios must be finite and positive")
    w_x = ratios / (1.0 + ratios)
    return w_x, 1.0 - w_x


def _fd_weight_rows(w_x: np.ndarray, w_y: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Stack (centre, x+, x-, y+, y-) weight rows for central differences."""
    n = w_x.size
    wx_rows = np.empty((n, 5))
    wy_rows = np.empty((n, 5))
    wx_rows[:, 0], wy_rows[:, 0] = w_x, w_y
    wx_rows[:, 1], wy_rows[:, 1] = w_x * (1.0 + h), w_y
    wx_rows[:, 2], wy_rows[:, 2] = w_x * (1.0 - h), w_y
    wx_rows[:, 3], wy_rows[:, 3] = w_x, w_y * (1.0 + h)
    wx_rows[:, 4], wy_rows[:, 4] = w_x, w_y * (1.0 - h)
    return wx_rows.ravel(), wy_rows.ravel()


def _tangency_points(
    bound_fn, w_x: np.ndarray, w_y: np.ndarray, h: float = FD_RELATIVE_STEP
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Tangency (v_x, v_y) = (df/dw_x, df/dw_y) per weight pair.

    ``bound_fn`` maps stacked (w_x, w_y) arrays to bound values.  Returns
    (v_x, v_y, f_centre, euler_defect); the Euler identity
    w_x v_x + w_y v_y = f holds for the exact homogeneous bound and its
    defect flags finite-difference or solver trouble.
    """
    wx_rows, wy_rows = _fd_weight_rows(w_x, w_y, h)
    f = bound_fn(wx_rows, wy_rows).reshape(-1, 5)
    v_x = (f[:, 1] - f[:, 2]) / (2.0 * h * w_x)
    v_y = (f[:, 3] - f[:, 4]) / (2.0 * h * w_y)
    euler = np.abs(w_x * v_x + w_y * v_y - f[:, 0]) / np.maximum(np.abs(f[:, 0]), 1e-300)
    return v_x, v_y, f[:, 0], euler


def _single_mode_bound_fn(cov: np.ndarray):
    s11, s22 = cov[0, 0], cov[1, 1]

    def fn(w_x, w_y):
        return w_x * s11 + w_y * s22 + 2.0 * np.sqrt(w_x * w_y)

    return fn


def boundary_for_config(probe: ProbeConfig, w_ratios) -> list[RegionSample]:
    """Lower-left boundary polyline of one probe's accessible region.

    One tangency point per weight ratio (w_x / w_y), sorted by v_x with
    strict monotonicity enforced (duplicate or non-decreasing v_y points are
    dropped).
    """
    ratios = np.asarray(list(w_ratios), dtype=float)
    if ratios.size == 0:
        raise ValueError("w_ratios must be nonempty")
    cov = build_probe(probe).cov
    w_x, w_y = _ratio_weights(ratios)
    if probe.n_modes == 1:
        bound_fn = _single_mode_bound_fn(cov)
    else:
        def bound_fn(wx_rows, wy_rows):
            return _chunked_batch_bound(cov, wx_rows, wy_rows)

    v_x, v_y, _, euler = _tangency_points(bound_fn, w_x, w_y)
    order = np.argsort(v_x)
    samples: list[RegionSample] = []
    for i in order:
        sample = RegionSample(
            v_x=float(v_x[i]),
            v_y=float(v_y[i]),
            source=SOURCE_NUMERIC,
            t=probe.t if probe.n_modes == 2 else None,
            phi1=probe.phi1,
            w_ratio=float(ratios[i]),
            converged=bool(euler[i] < 1e-6),
        )
        if samples and (sample.v_x <= samples[-1].v_x or sample.v_y >= samples[-1].v_y):
            continue
        samples.append(sample)
    return samples


def envelope(
    r1: float,
    r2: float,
    t_grid,
    phi_grid,
    w_grid,
    bins: int = ENVELOPE_BINS,
    sweep_phi2: bool = False,
) -> list[RegionSample]:
    """Pointwise-minimum envelope over probe configurations at binned v_x.

    Sweeps beam-splitter transmissivities and first-mode rotation angles
    (with phi2 = phi1 + pi/2 unless ``sweep_phi2`` asks for an exhaustive
    phi2 grid), collects the tangency points of every weight ratio, and keeps
    the lowest v_y in each logarithmic v_x bin.  The result dominates the
    analytic envelope and approaches it as the grids refine.
    """
    if r1 > r2:
        raise ValueError(f"canonical ordering requires r1 <= r2, got ({r1}, {r2})")
    t_values = np.asarray(list(t_grid), dtype=float)
    phi_values = np.asarray(list(phi_grid), dtype=float)
    ratios = np.asarray(list(w_grid), dtype=float)
    if t_values.size == 0 or phi_values.size == 0 or ratios.size == 0:
        raise ValueError("all grids must be nonempty")

    if sweep_phi2:
        configs = [
            (t, p1, p2) for t in t_values for p1 in phi_values for p2 in phi_values
        ]
    else:
        configs = [(t, p1, p1 + math.pi / 2.0) for t in t_values for p1 in phi_values]

    w_x, w_y = _ratio_weights(ratios)
    wx_rows, wy_rows = _fd_weight_rows(w_x, w_y, FD_RELATIVE_STEP)
    n_per_config = wx_rows.size

    cov_rows = np.empty((len(configs) * n_per_config, 4, 4))
    for i, (t, p1, p2) in enumerate(configs):
        cov = build_probe(ProbeConfig(r1=r1, r2=r2, phi1=p1, phi2=p2, t=t)).cov
        cov_rows[i * n_per_config : (i + 1) * n_per_config] = cov

    f = _chunked_batch_bound(
        cov_rows, np.tile(wx_rows, len(configs)), np.tile(wy_rows, len(configs))
    ).reshape(len(configs), ratios.size, 5)
    h = FD_RELATIVE_STEP
    v_x = (f[:, :, 1] - f[:, :, 2]) / (2.0 * h * w_x)
    v_y = (f[:, :, 3] - f[:, :, 4]) / (2.0 * h * w_y)

    # Bin every tangency point and keep the lowest v_y per bin.
    lo = math.exp(-2.0 * r2) * 1.001
    hi = 10.0 * math.exp(2.0 * r2)
    edges = np.geomspace(lo, hi, bins + 1)
    flat_vx = v_x.ravel()
    flat_vy = v_y.ravel()
    keep = np.isfinite(flat_vx) & np.isfinite(flat_vy) & (flat_vx >= lo) & (flat_vx <= hi)
    idx_config = np.repeat(np.arange(len(configs)), ratios.size)[keep]
    idx_ratio = np.tile(np.arange(ratios.size), len(configs))[keep]
    flat_vx, flat_vy = flat_vx[keep], flat_vy[keep]

    bin_of = np.clip(np.searchsorted(edges, flat_vx, side="right") - 1, 0, bins - 1)
    best = np.full(bins, np.inf)
    np.minimum.at(best, bin_of, flat_vy)
    samples: list[RegionSample] = []
    for b in np.nonzero(np.isfinite(best))[0]:
        members = np.nonzero(bin_of == b)[0]
        j = members[np.argmin(flat_vy[members])]
        t, p1, _ = configs[idx_config[j]]
        samples.append(
            RegionSample(
                v_x=float(flat_vx[j]),
                v_y=float(flat_vy[j]),
                source=SOURCE_NUMERIC,
                t=float(t),
                phi1=float(p1),
                w_ratio=float(ratios[idx_ratio[j]]),
            )
        )
    samples.sort(key=lambda s: s.v_x)
    return samples


def envelope_support_points(
    r1: float,
    r2: float,
    t_grid,
    phi_grid,
    w_grid,
    sweep_phi2: bool = False,
) -> list[RegionSample]:
    """Envelope sampled by weights: the best configuration's tangency per ratio.

    For each weight ratio the bound is minimized over the configuration grid
    and the winning configuration's tangency point is returned; this is the
    support-function sampling of the accessible region (one point per bound
    line), complementary to the binned pointwise minimum of envelope().
    """
    if r1 > r2:
        raise ValueError(f"canonical ordering requires r1 <= r2, got ({r1}, {r2})")
    t_values = np.asarray(list(t_grid), dtype=float)
    phi_values = np.asarray(list(phi_grid), dtype=float)
    ratios = np.asarray(list(w_grid), dtype=float)
    if t_values.size == 0 or phi_values.size == 0 or ratios.size == 0:
        raise ValueError("all grids must be nonempty")
    if sweep_phi2:
        configs = [(t, p1, p2) for t in t_values for p1 in phi_values for p2 in phi_values]
    else:
        configs = [(t, p1, p1 + math.pi / 2.0) for t in t_values for p1 in phi_values]

    w_x, w_y = _ratio_weights(ratios)
    wx_rows, wy_rows = _fd_weight_rows(w_x, w_y, FD_RELATIVE_STEP)
    cov_rows = np.empty((len(configs) * wx_rows.size, 4, 4))
    for i, (t, p1, p2) in enumerate(configs):
        cov = build_probe(ProbeConfig(r1=r1, r2=r2, phi1=p1, phi2=p2, t=t)).cov
        cov_rows[i * wx_rows.size : (i + 1) * wx_rows.size] = cov
    f = _chunked_batch_bound(
        cov_rows, np.tile(wx_rows, len(configs)), np.tile(wy_rows, len(configs))
    ).reshape(len(configs), ratios.size, 5)

    h = FD_RELATIVE_STEP
    winners = np.argmin(f[:, :, 0], axis=0)
    samples = []
    for j, ic in enumerate(winners):
        v_x = (f[ic, j, 1] - f[ic, j, 2]) / (2.0 * h * w_x[j])
        v_y = (f[ic, j, 3] - f[ic, j, 4]) / (2.0 * h * w_y[j])
        t, p1, _ = configs[ic]
        samples.append(
            RegionSample(
                v_x=float(v_x), v_y=float(v_y), source=SOURCE_NUMERIC,
                t=float(t), phi1=float(p1), w_ratio=float(ratios[j]),
            )
        )
    samples.sort(key=lambda s: s.v_x)
    return samples


def envelope_value(samples: list[RegionSample], v_x) -> np.ndarray:
    """Evaluate the numeric envelope at given v_x via its lower convex hull.

    The accessible region above the analytic envelope is convex, so the lower
    hull of boundary samples stays on or above the true envelope and only
    moves toward it as samples are added.
    """
    pts = sorted((s.v_x, s.v_y) for s in samples)
    if len(pts) < 2:
        raise ValueError("need at least two envelope samples")
    hull: list[tuple[float, float]] = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (p[0] - x1) * (y2 - y1) <= 0.0:
                hull.pop()
            else:
                break
        hull.append(p)
    xs = np.array([p[0] for p in hull])
    ys = np.array([p[1] for p in hull])
    return np.interp(np.asarray(v_x, dtype=float), xs, ys)


def closed_form_boundary(r1: float, r2: float, v_x_values) -> list[RegionSample]:
    """Analytic two-mode envelope samples with segment labels."""
    samples = []
    for v_x in np.asarray(list(v_x_values), dtype=float):
        point = closed_forms.two_mode_envelope(float(v_x), r1, r2)
        samples.append(
            RegionSample(
                v_x=float(point.v_x), v_y=float(point.v_y),
                source=SOURCE_CLOSED_FORM, segment=point.segment,
            )
        )
    samples.sort(key=lambda s: s.v_x)
    return samples


def single_mode_boundary(r: float, phi: float, v_x_values) -> list[RegionSample]:
    """Analytic single-mode tradeoff curve samples at fixed squeezing angle."""
    samples = []
    for v_x in np.asarray(list(v_x_values), dtype=float):
        v_y = closed_forms.single_mode_tradeoff(float(v_x), r, phi)
        samples.append(
            RegionSample(
                v_x=float(v_x), v_y=float(v_y), source=SOURCE_CLOSED_FORM,
                phi1=phi, segment="single-mode",
            )
        )
    samples.sort(key=lambda s: s.v_x)
    return samples


def sql_feasible(r1: float, r2: float) -> SqlFeasibility:
    """Whether both variances can be below 1 simultaneously, with a witness.

    The envelope's symmetric point v_x = v_y = (e^{-r1} + e^{-r2})^2 / 2
    minimizes max(v_x, v_y), so feasibility is exactly that value being below
    one.  For equal squeezing this coincides with the product criterion
    e^{-2 r1} e^{-2 r2} < 1/4.
    """
    if r1 > r2:
        r1, r2 = r2, r1
    midpoint = 0.5 * (math.exp(-r1) + math.exp(-r2)) ** 2
    if midpoint < 1.0:
        return SqlFeasibility(True, midpoint, midpoint)
    return SqlFeasibility(False)
