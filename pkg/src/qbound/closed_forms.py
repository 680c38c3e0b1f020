"""Analytic bounds, optima, and parametric curves for squeezed-probe displacement sensing.

These closed forms are the ground truth the numeric solver and region sweeps
are checked against.  Everything is expressed in terms of ``e^{-2r}`` where
possible to keep large squeezing parameters well conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian import MAX_SQUEEZING_R


def _check_r(*rs: float) -> None:
    for r in rs:
        if not np.isfinite(r) or r < 0.0:
            raise ValueError(f"squeezing parameter must be finite and >= 0, got {r}")
        if r > MAX_SQUEEZING_R:
            raise ValueError(f"r = {r} exceeds the supported maximum {MAX_SQUEEZING_R}")


def _canonical_pair(r1: float, r2: float) -> tuple[float, float, bool]:
    """Order (r1, r2) so that r1 <= r2, reporting whether a swap happened."""
    _check_r(r1, r2)
    if r1 > r2:
        return r2, r1, True
    return r1, r2, False


# ---------------------------------------------------------------------------
# Single-mode relations
# ---------------------------------------------------------------------------


def projected_variances(r: float, phi: float) -> tuple[float, float]:
    """X and Y variances of a squeezed state rotated by ``phi``.

    Returns ``(v_a, v_b)`` with
    ``v_a = e^{-2r} cos^2(phi) + e^{2r} sin^2(phi)`` and ``v_b`` the same with
    sin and cos swapped; their product is >= 1.
    """
    _check_r(r)
    e_m, e_p = math.exp(-2.0 * r), math.exp(2.0 * r)
    c2, s2 = math.cos(phi) ** 2, math.sin(phi) ** 2
    return e_m * c2 + e_p * s2, e_m * s2 + e_p * c2


def single_mode_line(w_x: float, w_y: float, r: float, phi: float) -> float:
    """Weighted-sum bound for a single-mode probe: w_x v_a + w_y v_b + 2 sqrt(w_x w_y)."""
    v_a, v_b = projected_variances(r, phi)
    return w_x * v_a + w_y * v_b + 2.0 * math.sqrt(w_x * w_y)


def single_mode_tradeoff(v_x: float, r: float, phi: float) -> float:
    """Minimal v_y at given v_x for a single-mode probe.

    The accessible pairs satisfy ``(v_x - v_a)(v_y - v_b) >= 1``; this returns
    the equality case ``v_b + 1/(v_x - v_a)``.
    """
    v_a, v_b = projected_variances(r, phi)
    if v_x <= v_a:
        raise ValueError(f"v_x = {v_x} is infeasible; single-mode floor is v_a = {v_a}")
    return v_b + 1.0 / (v_x - v_a)


def single_mode_precision_sum(v_x: float, v_y: float, r: float) -> float:
    """Weighted precision sum e^{-2r}/v_x + e^{2r}/v_y (phi = 0 regime).

    Achievable pairs give a value <= 1.
    """
    _check_r(r)
    if v_x <= 0.0 or v_y <= 0.0:
        raise ValueError("variances must be positive")
    return math.exp(-2.0 * r) / v_x + math.exp(2.0 * r) / v_y


# ---------------------------------------------------------------------------
# Two-mode accessible-region envelope
# ---------------------------------------------------------------------------

SEGMENT_LOW = "low"
SEGMENT_MIDDLE = "middle"
SEGMENT_HIGH = "high"


@dataclass(frozen=True)
class EnvelopePoint:
    v_x: float
    v_y: float
    segment: str
    swapped: bool = False


def envelope_v_c(r1: float, r2: float) -> float:
    """Left knee of the two-mode envelope: e^{-2 r2} + e^{-(r1+r2)}."""
    r1, r2, _ = _canonical_pair(r1, r2)
    return math.exp(-2.0 * r2) + math.exp(-(r1 + r2))


def envelope_v_d(r1: float, r2: float) -> float:
    """Right knee of the two-mode envelope: e^{-2 r1} + e^{-(r1+r2)}."""
    r1, r2, _ = _canonical_pair(r1, r2)
    return math.exp(-2.0 * r1) + math.exp(-(r1 + r2))


def two_mode_envelope(v_x: float, r1: float, r2: float) -> EnvelopePoint:
    """Minimal v_y over all rotations and mixing ratios of two squeezed inputs.

    Piecewise in v_x: two hyperbolic branches joined by the straight segment
    ``v_x + v_y = (e^{-r1} + e^{-r2})^2`` between the knees v_c and v_d.  The
    knees are included in the middle segment label; the branch values agree
    there, so the label is a tie-break only.  Inputs with r1 > r2 are
    canonicalized by swapping (flagged in the result).
    """
    r1, r2, swapped = _canonical_pair(r1, r2)
    f1, f2 = math.exp(-2.0 * r1), math.exp(-2.0 * r2)
    if v_x <= f2:
        raise ValueError(f"v_x = {v_x} is infeasible; the envelope floor is e^(-2 r2) = {f2}")
    v_c = f2 + math.exp(-(r1 + r2))
    v_d = f1 + math.exp(-(r1 + r2))
    if v_x < v_c:
        return EnvelopePoint(v_x, v_x * f1 / (v_x - f2), SEGMENT_LOW, swapped)
    if v_x <= v_d:
        total = (math.exp(-r1) + math.exp(-r2)) ** 2
        return EnvelopePoint(v_x, total - v_x, SEGMENT_MIDDLE, swapped)
    return EnvelopePoint(v_x, v_x * f2 / (v_x - f1), SEGMENT_HIGH, swapped)


@dataclass(frozen=True)
class OptimalConfig:
    """Optimal probe configuration and the variances it achieves.

    ``t_star`` follows the convention of the optimal-variance formulas
    (v_x = e^{-2 r1}/(1-t), v_y = e^{-2 r2}/t on the favoured branch);
    ``probe_t`` is the equivalent beam-splitter transmissivity in this
    package's mode-ordering convention (``probe_t = 1 - t_star``), i.e. the
    value to put in a ProbeConfig so that build_probe realizes this optimum.
    """

    t_star: float
    phi1: float
    phi2: float
    v_x: float
    v_y: float
    probe_t: float
    swapped: bool = False


def optimal_config(w_x: float, w_y: float, r1: float, r2: float, phi1: float = 0.0) -> OptimalConfig:
    """Optimal rotations, mixing ratio, and variances for given weights.

    For w_x < w_y the optimum uses phi1 = 0, phi2 = pi/2 and
    ``t* = e^{r1} / (e^{r1} + e^{r2} sqrt(w_x/w_y))``; for w_y < w_x the roles
    of x and y are swapped.  Equal weights admit a one-parameter family with
    constant v_x + v_y, selected by the ``phi1`` argument.  Degenerate weights
    return the single-parameter limit (direct probing with the stronger
    squeezer).
    """
    if w_x < 0.0 or w_y < 0.0 or w_x + w_y <= 0.0:
        raise ValueError("weights must be nonnegative and not both zero")
    r1, r2, swapped = _canonical_pair(r1, r2)
    e1, e2 = math.exp(r1), math.exp(r2)
    f1, f2 = math.exp(-2.0 * r1), math.exp(-2.0 * r2)
    cross = math.exp(-(r1 + r2))

    if w_x == 0.0:  # only theta_y matters: probe with the r2 squeezer directly
        return OptimalConfig(1.0, 0.0, math.pi / 2.0, math.inf, f2, 0.0, swapped)
    if w_y == 0.0:
        return OptimalConfig(1.0, math.pi / 2.0, 0.0, f2, math.inf, 0.0, swapped)

    if w_x < w_y:
        ratio = math.sqrt(w_x / w_y)
        t_star = e1 / (e1 + e2 * ratio)
        v_x = f1 + cross / ratio
        v_y = f2 + cross * ratio
        return OptimalConfig(t_star, 0.0, math.pi / 2.0, v_x, v_y, 1.0 - t_star, swapped)
    if w_y < w_x:
        ratio = math.sqrt(w_y / w_x)
        t_star = e1 / (e1 + e2 * ratio)
        v_y = f1 + cross / ratio
        v_x = f2 + cross * ratio
        return OptimalConfig(t_star, math.pi / 2.0, 0.0, v_x, v_y, 1.0 - t_star, swapped)

    # Equal weights: family endpoint selected by phi1 (phi2 = phi1 + pi/2).
    t_star = e1 / (e1 + e2)
    half_total = 0.5 * (math.exp(-r1) + math.exp(-r2)) ** 2
    offset = 0.5 * math.cos(2.0 * phi1) * (f1 - f2)
    return OptimalConfig(
        t_star, phi1, phi1 + math.pi / 2.0, half_total + offset, half_total - offset,
        1.0 - t_star, swapped,
    )


# ---------------------------------------------------------------------------
# Equal-squeezing example: scalar dual parameter and its quartic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Example2Params:
    """Scalar dual parameter for the equal-squeezing probe at t = 0.5."""

    lambda_star: float
    gamma: float
    r: float
    ratio: float
    residual: float


def _quartic_coefficients(ratio: float, tanh2r: float) -> np.ndarray:
    # ratio * g^4 - ratio * tanh(2r) * g^3 + tanh(2r) * g - 1 = 0
    return np.array([ratio, -ratio * tanh2r, 0.0, tanh2r, -1.0])


def gamma_quartic_root(ratio: float, r: float) -> Example2Params:
    """Positive root of the quartic fixing the optimal scalar dual at t = 0.5.

    ``ratio`` is w_y / w_x.  The root is located from the companion matrix of
    the quartic and polished with Newton steps; ``lambda_star`` is
    ``-e^{-r} (1 + gamma) / sqrt(2)``.  Degenerate limits: ratio = 0 gives
    gamma = coth(2r); r = 0 gives gamma = ratio^{-1/4}.
    """
    _check_r(r)
    if ratio < 0.0 or not np.isfinite(ratio):
        raise ValueError(f"weight ratio must be finite and >= 0, got {ratio}")
    if ratio == 0.0:
        if r == 0.0:
            raise ValueError("ratio = 0 with r = 0 is jointly degenerate (no finite root)")
        gamma = 1.0 / math.tanh(2.0 * r)
    elif r == 0.0:
        gamma = ratio ** -0.25
    else:
        tanh2r = math.tanh(2.0 * r)
        coeffs = _quartic_coefficients(ratio, tanh2r)
        roots = np.roots(coeffs)
        real = roots[np.abs(roots.imag) <= 1e-8 * np.maximum(1.0, np.abs(roots.real))].real
        positive = np.sort(real[real > 0.0])
        if positive.size == 0:
            raise ArithmeticError(f"no positive real quartic root for ratio={ratio}, r={r}")
        # Numerically coincident positive roots are averaged before polishing.
        clusters = [positive[0]]
        for g in positive[1:]:
            if g - clusters[-1] > 1e-8 * max(1.0, g):
                clusters.append(g)
        gamma = float(np.mean(positive)) if len(clusters) == 1 else float(clusters[0])
        poly = np.polynomial.Polynomial(coeffs[::-1])
        dpoly = poly.deriv()
        for _ in range(50):
            val = poly(gamma)
            der = dpoly(gamma)
            if der == 0.0:
                break
            step = val / der
            gamma -= step
            if abs(step) <= 1e-16 * max(1.0, abs(gamma)):
                break
    lam = -math.exp(-r) * (1.0 + gamma) / math.sqrt(2.0)
    if ratio == 0.0 or r == 0.0:
        residual = 0.0
    else:
        tanh2r = math.tanh(2.0 * r)
        residual = ratio * gamma**3 * (gamma - tanh2r) + gamma * tanh2r - 1.0
    return Example2Params(lam, gamma, r, ratio, abs(float(residual)))


def example2_parametric(lam: float, r: float, t: float) -> tuple[float, float]:
    """Variance pair (f_x, f_y) traced by the scalar dual parameter.

    For equal squeezing r1 = r2 = r with orthogonal squeezing angles mixed at
    transmissivity t:

        f_x = [(1 + lam sqrt(t) e^r)^2 + lam^2 (1-t) e^{-2r}] / (lam + sqrt(t) e^{-r})^2
        f_y = [(1 + lam sqrt(t) e^r)^2 + lam^2 (1-t) e^{-2r}] / ((1-t) e^{-2r})
    """
    _check_r(r)
    if not 0.0 < t < 1.0:
        raise ValueError(f"transmissivity must lie strictly inside (0, 1), got {t}")
    sqrt_t = math.sqrt(t)
    e_r, e_m = math.exp(r), math.exp(-r)
    denom_x = (lam + sqrt_t * e_m) ** 2
    if denom_x == 0.0:
        raise ZeroDivisionError(f"lambda = {lam} sits on the f_x pole -sqrt(t) e^(-r)")
    numer = (1.0 + lam * sqrt_t * e_r) ** 2 + lam**2 * (1.0 - t) * math.exp(-2.0 * r)
    return numer / denom_x, numer / ((1.0 - t) * math.exp(-2.0 * r))


def example2_lambda_endpoints(r: float) -> tuple[float, float]:
    """Lambda interval whose image is the t = 0.5 boundary curve."""
    _check_r(r)
    if r == 0.0:
        raise ValueError("r must be positive for the boundary-curve endpoints")
    return (
        -math.exp(r) / (math.sqrt(2.0) * math.sinh(2.0 * r)),
        -math.exp(r) / (math.sqrt(2.0) * math.cosh(2.0 * r)),
    )


# ---------------------------------------------------------------------------
# Scalar corollaries and the one-squeezer example
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarCorollaries:
    single_mode_product_floor: float
    two_mode_product_floor: float
    balanced_precision_sum: float | None
    sql_feasible: bool


def scalar_corollaries(r1: float, r2: float) -> ScalarCorollaries:
    """Uncertainty-product floors and the squeezing threshold for beating the SQL.

    ``balanced_precision_sum`` (1/v_x + 1/v_y at the balanced optimum, equal
    to e^{2r}) only exists for r1 = r2 and is None otherwise.  The
    ``sql_feasible`` field is the necessary condition
    ``e^{-2 r1} e^{-2 r2} < 1/4``; see regions.sql_feasible for the geometric
    (necessary and sufficient) test.
    """
    r1, r2, _ = _canonical_pair(r1, r2)
    product_floor = 4.0 * math.exp(-2.0 * (r1 + r2))
    balanced = math.exp(2.0 * r1) if r1 == r2 else None
    return ScalarCorollaries(
        single_mode_product_floor=4.0,
        two_mode_product_floor=product_floor,
        balanced_precision_sum=balanced,
        sql_feasible=math.exp(-2.0 * (r1 + r2)) < 0.25,
    )


def example1_variances(t: float, r2: float, favour: str = "y") -> tuple[float, float]:
    """Variance pair of the one-squeezer scheme at transmissivity t.

    favour='y' puts the squeezing benefit on theta_y: (1/(1-t), e^{-2 r2}/t);
    favour='x' is the mirrored pair.  Optimal for t >= 1/(1 + e^{r2}).
    """
    _check_r(r2)
    if not 0.0 < t < 1.0:
        raise ValueError(f"transmissivity must lie strictly inside (0, 1), got {t}")
    if favour == "y":
        return 1.0 / (1.0 - t), math.exp(-2.0 * r2) / t
    if favour == "x":
        return math.exp(-2.0 * r2) / t, 1.0 / (1.0 - t)
    raise ValueError(f"favour must be 'x' or 'y', got {favour!r}")


def example1_relations(v_x: float, v_y: float, r2: float, which: str = "y-favoured") -> float:
    """Precision-sum relation for one squeezed state plus a vacuum ancilla.

    'y-favoured' evaluates 1/v_x + e^{-2 r2}/v_y; 'x-favoured' the mirrored
    e^{-2 r2}/v_x + 1/v_y.  Achievable pairs give a value <= 1, with equality
    on the parametric family of example1_variances.
    """
    _check_r(r2)
    if v_x <= 0.0 or v_y <= 0.0:
        raise ValueError("variances must be positive")
    f2 = math.exp(-2.0 * r2)
    if which == "y-favoured":
        return 1.0 / v_x + f2 / v_y
    if which == "x-favoured":
        return f2 / v_x + 1.0 / v_y
    raise ValueError(f"which must be 'x-favoured' or 'y-favoured', got {which!r}")
