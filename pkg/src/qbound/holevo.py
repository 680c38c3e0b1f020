"""Weighted-variance precision bound for conjugate displacement estimation.

The bound is the minimum, over locally unbiased dual observables restricted
to linear combinations of quadratures, of

    h = w_x Re Z_11 + w_y Re Z_22 + 2 sqrt(w_x w_y) |Im Z_12|,

with Z_jk the second moments of the duals in the probe state.  In covariance
language, for duals ``X_x = c_x . R`` and ``X_y = c_y . R``:

    h = w_x c_x' S c_x + w_y c_y' S c_y + 2 sqrt(w_x w_y) |c_x' Omega c_y|.

Local unbiasedness for the displacement channel fixes the mode-1 entries of
the coefficient vectors (c_x = (1, 0, a, b) and c_y = (0, 1, c, d) for two
modes), leaving a 4-dimensional minimization.  That function is a positive
quadratic plus a scaled absolute value of a bilinear form, so its minimizers
are either stationary points of one of the two sign branches (a 4x4 linear
solve each) or points on the kink manifold |.| = 0, which form a scalar
family indexed by the kink multiplier m in [-sqrt(w_x w_y), +sqrt(w_x w_y)].
Both candidate sets are computed exactly and the best is confirmed by a
multi-start simplex search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as _cheb
from scipy import optimize as _opt

from .gaussian import GaussianState, symplectic_form

__all__ = [
    "Weights",
    "DualCoefficients",
    "DualShape",
    "BoundResult",
    "SolverConvergenceError",
    "unbiased_constraints",
    "objective",
    "single_mode_closed",
    "solve",
    "batch_bound",
    "extract_measurement",
]


class SolverConvergenceError(RuntimeError):
    """Raised when the minimizer cannot certify a bound value."""


@dataclass(frozen=True)
class Weights:
    """Positive weights attached to the two estimation variances."""

    w_x: float
    w_y: float

    def __post_init__(self):
        if not (np.isfinite(self.w_x) and np.isfinite(self.w_y)):
            raise ValueError("weights must be finite")
        if self.w_x < 0.0 or self.w_y < 0.0 or self.w_x + self.w_y <= 0.0:
            raise ValueError(f"weights must be >= 0 and not both zero, got {self}")

    @property
    def geometric(self) -> float:
        return math.sqrt(self.w_x * self.w_y)


@dataclass(frozen=True)
class DualCoefficients:
    """Quadrature coefficients of the dual observables X_x and X_y."""

    c_x: np.ndarray
    c_y: np.ndarray

    def __post_init__(self):
        c_x = np.asarray(self.c_x, dtype=float)
        c_y = np.asarray(self.c_y, dtype=float)
        if c_x.shape != c_y.shape or c_x.ndim != 1 or c_x.size not in (2, 4):
            raise ValueError("dual coefficient vectors must both have length 2 or 4")
        if not (np.isfinite(c_x).all() and np.isfinite(c_y).all()):
            raise ValueError("dual coefficients must be finite")
        shape = unbiased_constraints(c_x.size // 2)
        fixed = [(c_x, shape.c_x_fixed), (c_y, shape.c_y_fixed)]
        for vec, template in fixed:
            if np.max(np.abs(vec[:2] - template[:2])) > 1e-12:
                raise ValueError("mode-1 entries violate the local unbiasedness constraints")
        for name in ("c_x", "c_y"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def single_mode(cls) -> "DualCoefficients":
        return cls(np.array([1.0, 0.0]), np.array([0.0, 1.0]))

    @classmethod
    def from_free(cls, free) -> "DualCoefficients":
        """Two-mode duals from the free vector (a, b, c, d)."""
        a, b, c, d = np.asarray(free, dtype=float)
        return cls(np.array([1.0, 0.0, a, b]), np.array([0.0, 1.0, c, d]))

    @property
    def n_modes(self) -> int:
        return self.c_x.size // 2

    @property
    def free(self) -> np.ndarray:
        """The unconstrained entries (a, b, c, d); empty for one mode."""
        if self.n_modes == 1:
            return np.zeros(0)
        return np.concatenate([self.c_x[2:], self.c_y[2:]])

    def commutator(self) -> float:
        """c_x' Omega c_y; the duals commute iff this vanishes."""
        omega = symplectic_form(self.n_modes)
        return float(self.c_x @ omega @ self.c_y)


@dataclass(frozen=True)
class DualShape:
    """Constrained shape of the dual coefficients for a given mode count."""

    n_modes: int
    n_free: int
    c_x_fixed: np.ndarray
    c_y_fixed: np.ndarray


def unbiased_constraints(n_modes: int) -> DualShape:
    """Reduce the locally unbiased conditions for linear duals.

    The displacement channel shifts the mode-1 means, so for a zero-mean
    probe the conditions pin the X1 coefficient of X_x to 1 (0 in X_y) and
    the Y1 coefficient of X_y to 1 (0 in X_x).  One mode leaves no freedom;
    two modes leave the four mode-2 entries free.
    """
    if n_modes == 1:
        return DualShape(1, 0, np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    if n_modes == 2:
        return DualShape(
            2, 4, np.array([1.0, 0.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0, 0.0])
        )
    raise ValueError(f"unsupported mode count {n_modes}")


@dataclass(frozen=True)
class BoundResult:
    """Bound value with the optimizing duals and their second-moment matrix."""

    f_hcr: float
    duals: DualCoefficients
    z_real: np.ndarray = field(repr=False)
    z_imag: np.ndarray = field(repr=False)
    weights: Weights = field(repr=False)
    converged: bool = True
    iterations: int = 0

    @property
    def v_x(self) -> float:
        """Tangency variance dh/dw_x at the optimum."""
        if self.weights.w_x == 0.0:
            return math.inf
        ratio = math.sqrt(self.weights.w_y / self.weights.w_x)
        return float(self.z_real[0, 0] + ratio * abs(self.z_imag[0, 1]))

    @property
    def v_y(self) -> float:
        """Tangency variance dh/dw_y at the optimum."""
        if self.weights.w_y == 0.0:
            return math.inf
        ratio = math.sqrt(self.weights.w_x / self.weights.w_y)
        return float(self.z_real[1, 1] + ratio * abs(self.z_imag[0, 1]))


def _as_cov(cov) -> np.ndarray:
    if isinstance(cov, GaussianState):
        return cov.cov
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] not in (2, 4):
        raise ValueError(f"covariance must be 2x2 or 4x4, got shape {cov.shape}")
    return cov


def objective(cov, weights: Weights, duals: DualCoefficients) -> float:
    """Weighted dual-variance objective h at the given coefficients."""
    sigma = _as_cov(cov)
    if sigma.shape[0] != duals.c_x.size:
        raise ValueError(
            f"covariance size {sigma.shape[0]} does not match duals of length {duals.c_x.size}"
        )
    v_xx = float(duals.c_x @ sigma @ duals.c_x)
    v_yy = float(duals.c_y @ sigma @ duals.c_y)
    return weights.w_x * v_xx + weights.w_y * v_yy + 2.0 * weights.geometric * abs(
        duals.commutator()
    )


def _result_from_duals(cov, weights: Weights, duals: DualCoefficients,
                       converged: bool = True, iterations: int = 0) -> BoundResult:
    sigma = _as_cov(cov)
    omega = symplectic_form(duals.n_modes)
    z_real = np.array(
        [
            [duals.c_x @ sigma @ duals.c_x, duals.c_x @ sigma @ duals.c_y],
            [duals.c_x @ sigma @ duals.c_y, duals.c_y @ sigma @ duals.c_y],
        ]
    )
    im = float(duals.c_x @ omega @ duals.c_y)
    z_imag = np.array([[0.0, im], [-im, 0.0]])
    f = weights.w_x * z_real[0, 0] + weights.w_y * z_real[1, 1] + 2.0 * weights.geometric * abs(im)
    return BoundResult(float(f), duals, z_real, z_imag, weights, converged, iterations)


def single_mode_closed(cov, weights: Weights) -> BoundResult:
    """Closed single-mode bound w_x S_11 + w_y S_22 + 2 sqrt(w_x w_y).

    The unbiasedness constraints leave no freedom for one mode, so this is
    exact; solve() routes single-mode inputs here.
    """
    sigma = _as_cov(cov)
    if sigma.shape[0] != 2:
        raise ValueError("single_mode_closed expects a 2x2 covariance")
    return _result_from_duals(sigma, weights, DualCoefficients.single_mode())


# ---------------------------------------------------------------------------
# Vectorized exact candidates for the two-mode problem
# ---------------------------------------------------------------------------

_KINK_FIT_DEGREE = 8
_KINK_NODES = np.cos(np.linspace(0.0, np.pi, _KINK_FIT_DEGREE + 1))
_KINK_VANDER_INV = np.linalg.inv(_cheb.chebvander(_KINK_NODES, _KINK_FIT_DEGREE))
_KINK_SCAN = np.linspace(-1.0, 1.0, 161)
_KINK_SCAN_VANDER = _cheb.chebvander(_KINK_SCAN, _KINK_FIT_DEGREE)


def _batch_pieces(covs: np.ndarray):
    q_x = covs[:, 0, 0]
    q_y = covs[:, 1, 1]
    g_x = covs[:, 0, 2:]
    g_y = covs[:, 1, 2:]
    b = covs[:, 2:, 2:]
    return q_x, q_y, g_x, g_y, b


def _batch_objective(q_x, q_y, g_x, g_y, b, w_x, w_y, x) -> np.ndarray:
    """Objective at free coefficients x (rows of (a, b, c, d))."""
    u, v = x[:, :2], x[:, 2:]
    v_xx = q_x + 2.0 * np.einsum("ni,ni->n", g_x, u) + np.einsum("ni,nij,nj->n", u, b, u)
    v_yy = q_y + 2.0 * np.einsum("ni,ni->n", g_y, v) + np.einsum("ni,nij,nj->n", v, b, v)
    beta = 1.0 + x[:, 0] * x[:, 3] - x[:, 1] * x[:, 2]
    return w_x * v_xx + w_y * v_yy + 2.0 * np.sqrt(w_x * w_y) * np.abs(beta)


def _solve_multiplier_system(b, g_x, g_y, w_x, w_y, m):
    """Stationary point of the sign-branch objective at multiplier m (batched).

    Solves [[w_x B, m w], [-m w, w_y B]] x = -(w_x g_x, w_y g_y) with
    w = [[0, 1], [-1, 0]].  Returns (x, det, valid).
    """
    n = b.shape[0]
    mat = np.zeros((n, 4, 4))
    mat[:, :2, :2] = w_x[:, None, None] * b
    mat[:, 2:, 2:] = w_y[:, None, None] * b
    mat[:, 0, 3] = m
    mat[:, 1, 2] = -m
    mat[:, 2, 1] = -m
    mat[:, 3, 0] = m
    rhs = np.concatenate([-w_x[:, None] * g_x, -w_y[:, None] * g_y], axis=1)
    det = np.linalg.det(mat)
    scale = np.abs(np.linalg.det(b)) * np.maximum(w_x * w_y, 1e-30)
    valid = np.abs(det) > 1e-13 * (scale**2 + m**4 + 1.0)
    safe = np.where(valid[:, None, None], mat, np.eye(4))
    x = np.linalg.solve(safe, rhs[..., None])[..., 0]
    return x, det, valid


def _beta_of(x: np.ndarray) -> np.ndarray:
    return 1.0 + x[:, 0] * x[:, 3] - x[:, 1] * x[:, 2]


def _kink_roots(b, g_x, g_y, w_x, w_y, c):
    """Kink-manifold multipliers: roots of beta(x(m)) for |m| <= c (batched).

    beta(x(m)) det(M(m))^2 is a polynomial of degree <= 8 in s = m/c; it is
    reconstructed exactly from 9 Chebyshev nodes, scanned densely for sign
    changes, and each bracket is polished with safeguarded Newton steps.
    Returns (row_indices, multipliers).
    """
    n = b.shape[0]
    active = c > 0.0
    if not np.any(active):
        return np.zeros(0, dtype=int), np.zeros(0)
    p_nodes = np.empty((n, _KINK_FIT_DEGREE + 1))
    ok = np.ones(n, dtype=bool)
    for k, s in enumerate(_KINK_NODES):
        x, det, valid = _solve_multiplier_system(b, g_x, g_y, w_x, w_y, c * s)
        ok &= valid
        p_nodes[:, k] = _beta_of(x) * det * det
    ok &= active
    if not np.any(ok):
        return np.zeros(0, dtype=int), np.zeros(0)
    rows = np.nonzero(ok)[0]
    coeffs = p_nodes[rows] @ _KINK_VANDER_INV.T
    norm = np.max(np.abs(coeffs), axis=1)
    coeffs = coeffs / np.where(norm > 0.0, norm, 1.0)[:, None]

    scan = coeffs @ _KINK_SCAN_VANDER.T
    signs = np.signbit(scan)
    flips = signs[:, 1:] != signs[:, :-1]
    rr, cc = np.nonzero(flips)
    if rr.size == 0:
        return np.zeros(0, dtype=int), np.zeros(0)

    lo = _KINK_SCAN[cc].copy()
    hi = _KINK_SCAN[cc + 1].copy()
    f_lo = scan[rr, cc]
    c_sel = coeffs[rr].T  # (deg+1, K)
    dc_sel = _cheb.chebder(c_sel, axis=0)
    s = 0.5 * (lo + hi)
    for _ in range(60):
        p = _cheb.chebval(s, c_sel, tensor=False)
        neg_side = (p > 0.0) == (f_lo > 0.0)
        lo = np.where(neg_side, s, lo)
        hi = np.where(neg_side, hi, s)
        dp = _cheb.chebval(s, dc_sel, tensor=False)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = p / dp
        s_newton = s - step
        inside = np.isfinite(s_newton) & (s_newton > lo) & (s_newton < hi)
        s = np.where(inside, s_newton, 0.5 * (lo + hi))
        if np.max(hi - lo) < 1e-15:
            break
    full_rows = rows[rr]
    c_roots = c[full_rows]
    m = c_roots * np.clip(s, -1.0, 1.0)
    # The bound is first-order sensitive to the multiplier at a kink optimum,
    # so polish on the exact rational function: dbeta/dm follows from
    # dx/dm = -M^{-1} (dM/dm) x with dM/dm the constant coupling pattern.
    dm_pattern = np.zeros((4, 4))
    dm_pattern[0, 3] = dm_pattern[3, 0] = 1.0
    dm_pattern[1, 2] = dm_pattern[2, 1] = -1.0
    br, gxr, gyr = b[full_rows], g_x[full_rows], g_y[full_rows]
    wxr, wyr = w_x[full_rows], w_y[full_rows]
    for _ in range(3):
        x, det, valid = _solve_multiplier_system(br, gxr, gyr, wxr, wyr, m)
        mat = np.zeros((m.size, 4, 4))
        mat[:, :2, :2] = wxr[:, None, None] * br
        mat[:, 2:, 2:] = wyr[:, None, None] * br
        mat[:, 0, 3] = m
        mat[:, 1, 2] = -m
        mat[:, 2, 1] = -m
        mat[:, 3, 0] = m
        safe = np.where(valid[:, None, None], mat, np.eye(4))
        dx = -np.linalg.solve(safe, (dm_pattern @ x[..., None]))[..., 0]
        grad = np.stack([x[:, 3], -x[:, 2], -x[:, 1], x[:, 0]], axis=1)
        dbeta = np.einsum("ni,ni->n", grad, dx)
        beta = _beta_of(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = beta / dbeta
        step = np.where(np.isfinite(step) & valid, step, 0.0)
        m = np.clip(m - step, -c_roots, c_roots)
    return full_rows, m


def _candidate_frees(covs: np.ndarray, w_x: np.ndarray, w_y: np.ndarray):
    """All exact candidate free-coefficient vectors per batch row.

    Yields (rows, x) pairs where x are candidate (a, b, c, d) rows aligned
    with the batch indices in rows.
    """
    q_x, q_y, g_x, g_y, b = _batch_pieces(covs)
    c = np.sqrt(w_x * w_y)
    out = []

    # Degenerate weights: the objective is a pure quadratic per dual; the
    # stationary point is the Schur-complement linear solve.
    degenerate = c == 0.0
    if np.any(degenerate):
        rows = np.nonzero(degenerate)[0]
        u = -np.linalg.solve(b[rows], g_x[rows][..., None])[..., 0]
        v = -np.linalg.solve(b[rows], g_y[rows][..., None])[..., 0]
        out.append((rows, np.concatenate([u, v], axis=1)))

    regular = ~degenerate
    if np.any(regular):
        rows = np.nonzero(regular)[0]
        bq, gxq, gyq = b[rows], g_x[rows], g_y[rows]
        wxq, wyq, cq = w_x[rows], w_y[rows], c[rows]
        for m in (-cq, np.zeros_like(cq), cq):
            x, _, valid = _solve_multiplier_system(bq, gxq, gyq, wxq, wyq, m)
            vr = np.nonzero(valid)[0]
            if vr.size:
                out.append((rows[vr], x[vr]))
        kr, km = _kink_roots(bq, gxq, gyq, wxq, wyq, cq)
        if kr.size:
            x, _, valid = _solve_multiplier_system(
                bq[kr], gxq[kr], gyq[kr], wxq[kr], wyq[kr], km
            )
            vr = np.nonzero(valid)[0]
            if vr.size:
                out.append((rows[kr[vr]], x[vr]))
    return out


def batch_bound(covs, w_x, w_y) -> np.ndarray:
    """Bound values for a batch of (covariance, weights) rows.

    ``covs`` may be one 4x4 matrix (broadcast) or an (N, 4, 4) stack; ``w_x``
    and ``w_y`` are length-N vectors.  Every candidate is a feasible dual, so
    the returned values are exact minima wherever a candidate is valid and
    upper bounds otherwise (rows with no valid candidate return inf).
    """
    w_x = np.atleast_1d(np.asarray(w_x, dtype=float))
    w_y = np.atleast_1d(np.asarray(w_y, dtype=float))
    n = w_x.size
    covs = np.asarray(covs, dtype=float)
    if covs.ndim == 2:
        covs = np.broadcast_to(covs, (n, 4, 4))
    # Normalizing to unit weight sum keeps the linear systems well scaled and
    # makes the homogeneity f(c W) = c f(W) hold by construction.
    total = w_x + w_y
    w_x = w_x / total
    w_y = w_y / total
    q_x, q_y, g_x, g_y, b = _batch_pieces(covs)
    best = np.full(n, np.inf)
    for rows, x in _candidate_frees(covs, w_x, w_y):
        vals = _batch_objective(
            q_x[rows], q_y[rows], g_x[rows], g_y[rows], b[rows], w_x[rows], w_y[rows], x
        )
        vals = np.where(np.isfinite(vals), vals, np.inf)
        np.minimum.at(best, rows, vals)
    return best * total


# ---------------------------------------------------------------------------
# Certified single-instance solver
# ---------------------------------------------------------------------------

_N_EXTRA_STARTS = 5
_START_SEED = 1234


def solve(cov, weights: Weights, starts: int = 8) -> BoundResult:
    """Minimize the weighted dual-variance objective for a probe covariance.

    Single-mode covariances take the closed path.  Two-mode covariances use
    the exact candidate set (sign-branch and kink-multiplier solutions) and a
    multi-start Nelder-Mead search seeded from the candidates plus fixed
    pseudo-random points; the best value over all routes is returned with its
    duals.  A result is flagged unconverged if no simplex run terminates and
    no exact candidate is available.
    """
    sigma = _as_cov(cov)
    if sigma.shape[0] == 2:
        return single_mode_closed(sigma, weights)

    total = weights.w_x + weights.w_y
    w_x = np.array([weights.w_x / total])
    w_y = np.array([weights.w_y / total])
    covs = sigma[None, :, :]
    q_x, q_y, g_x, g_y, b = _batch_pieces(covs)

    def fun(x):
        return float(
            _batch_objective(q_x, q_y, g_x, g_y, b, w_x, w_y, np.asarray(x)[None, :])[0]
        )

    candidates = [x[0] for rows, x in _candidate_frees(covs, w_x, w_y)]
    seeds = list(candidates)
    seeds.append(np.zeros(4))
    rng = np.random.default_rng(_START_SEED)
    n_random = max(starts - len(seeds), _N_EXTRA_STARTS)
    seeds.extend(rng.normal(scale=1.5, size=(n_random, 4)))

    best_f, best_x = np.inf, np.zeros(4)
    for x0 in candidates:
        f0 = fun(x0)
        if f0 < best_f:
            best_f, best_x = f0, np.asarray(x0, dtype=float)

    iterations = 0
    nm_converged = False
    options = {"xatol": 1e-11, "fatol": 1e-13, "maxiter": 4000, "maxfev": 8000}
    for x0 in seeds:
        res = _opt.minimize(fun, np.asarray(x0, dtype=float), method="Nelder-Mead", options=options)
        iterations += int(res.nit)
        nm_converged |= bool(res.success)
        if np.isfinite(res.fun) and res.fun < best_f:
            best_f, best_x = float(res.fun), res.x
    # Re-polish from the incumbent; the kink is handled by direct evaluation.
    res = _opt.minimize(fun, best_x, method="Nelder-Mead", options=options)
    iterations += int(res.nit)
    if np.isfinite(res.fun) and res.fun < best_f:
        best_f, best_x = float(res.fun), res.x

    converged = nm_converged or bool(candidates)
    duals = DualCoefficients.from_free(best_x)
    return _result_from_duals(sigma, weights, duals, converged, iterations)


def extract_measurement(result: BoundResult, cov):
    """Product-homodyne scheme realizing the optimal duals, when one exists.

    Delegates to the measurement layer; see simulate.scheme_from_duals for
    the construction and the no-certificate flag.
    """
    from .simulate import scheme_from_duals

    if not result.converged:
        raise SolverConvergenceError("cannot extract a measurement from an unconverged result")
    return scheme_from_duals(result.duals, _as_cov(cov), result.weights)
