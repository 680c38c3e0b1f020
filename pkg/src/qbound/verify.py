"""Cross-verification suite: every acceptance check as a named, runnable unit.

Each check compares an independent computation route against the closed
forms (or against statistical bands for the Monte-Carlo checks) and reports
pass/fail with diagnostic numbers.  The CLI `verify` command runs these and
exits nonzero on any failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import closed_forms, regions
from .gaussian import (
    ChannelParams,
    ProbeConfig,
    beam_splitter,
    build_probe,
    make_squeezed,
    rotation,
    symplectic_form,
)
from .holevo import Weights, batch_bound, solve
from .simulate import build_scheme, compare_to_bound, run_scheme


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


def _envelope_grids(r1: float, r2: float, n_w: int, n_phi: int):
    """Weight-ratio grid (log-spread, including 1) and its matched t grid.

    The t values are the dual-homodyne optima of the ratio grid, so the
    configuration sweep brackets the envelope tightly at every ratio.
    """
    half = (n_w + 2) // 2
    exps = np.unique(np.concatenate([np.linspace(-2.5, 0.0, half), np.linspace(0.0, 2.5, half)]))
    w_grid = 10.0 ** exps[: n_w]
    amp = math.exp(-r1) * np.sqrt(w_grid)
    t_grid = np.unique(amp / (amp + math.exp(-r2)))
    phi_grid = np.linspace(0.0, math.pi / 2.0, n_phi)
    return w_grid, t_grid, phi_grid


def check_single_mode_closed_form(quick: bool = False) -> CheckResult:
    """Numeric bound equals the closed single-mode line on an (r, phi, w) grid."""
    rs = np.arange(0.0, 1.51, 0.3 if quick else 0.1)
    phis = np.arange(0.0, math.pi / 2.0 + 1e-12, math.pi / 12.0)
    ratios = (0.1, 1.0, 10.0)
    worst = 0.0
    for r in rs:
        for phi in phis:
            cov = make_squeezed(r, phi).cov
            for ratio in ratios:
                w = Weights(ratio / (1.0 + ratio), 1.0 / (1.0 + ratio))
                got = solve(cov, w).f_hcr
                want = closed_forms.single_mode_line(w.w_x, w.w_y, r, phi)
                worst = max(worst, abs(got - want) / want)
    return CheckResult("single-mode-closed-form", worst <= 1e-9, {"max_rel_err": worst})


def check_equal_squeezing_optimum(quick: bool = False) -> CheckResult:
    """Solver at the optimal two-mode configuration hits (sqrt(wx)+sqrt(wy))^2 e^{-2r}."""
    worst = 0.0
    for w_x, w_y in ((1.0, 1.0), (1.0, 4.0), (4.0, 1.0)):
        for r in (0.2, 0.5, 0.693):
            opt = closed_forms.optimal_config(w_x, w_y, r, r)
            probe = ProbeConfig(r1=r, r2=r, phi1=opt.phi1, phi2=opt.phi2, t=opt.probe_t)
            got = solve(build_probe(probe).cov, Weights(w_x, w_y)).f_hcr
            want = (math.sqrt(w_x) + math.sqrt(w_y)) ** 2 * math.exp(-2.0 * r)
            worst = max(worst, abs(got - want) / want)
    return CheckResult("equal-squeezing-optimum", worst <= 1e-6, {"max_rel_err": worst})


def check_weight_special_cases(quick: bool = False) -> CheckResult:
    """Degenerate weights at t = 0.5 give 1/cosh(2r) via both routes."""
    worst_formula = 0.0
    worst_solver = 0.0
    for r in (0.2, 0.5, 0.5 * math.log(4.0)):
        want = 1.0 / math.cosh(2.0 * r)
        for ratio, lam_row in ((0.0, "x"), (math.inf, "y")):
            if lam_row == "x":
                lam = -math.exp(r) / (math.sqrt(2.0) * math.sinh(2.0 * r))
                f_val = closed_forms.example2_parametric(lam, r, 0.5)[0]
                w = Weights(1.0, 0.0)
            else:
                lam = -math.exp(r) / (math.sqrt(2.0) * math.cosh(2.0 * r))
                f_val = closed_forms.example2_parametric(lam, r, 0.5)[1]
                w = Weights(0.0, 1.0)
            worst_formula = max(worst_formula, abs(f_val - want) / want)
            probe = ProbeConfig(r1=r, r2=r, phi1=0.0, phi2=math.pi / 2.0, t=0.5)
            got = solve(build_probe(probe).cov, w).f_hcr
            worst_solver = max(worst_solver, abs(got - want) / want)
    passed = worst_formula <= 1e-12 and worst_solver <= 1e-6
    return CheckResult(
        "weight-special-cases", passed,
        {"max_rel_err_formula": worst_formula, "max_rel_err_solver": worst_solver},
    )


def check_quartic_root(quick: bool = False, seed: int = 7) -> CheckResult:
    """Quartic root identities and residuals over random (ratio, r)."""
    rng = np.random.default_rng(seed)
    worst_unit = 0.0
    for r in rng.uniform(0.05, 2.0, 20):
        worst_unit = max(worst_unit, abs(closed_forms.gamma_quartic_root(1.0, r).gamma - 1.0))
    worst_coth = 0.0
    for r in rng.uniform(0.05, 2.0, 20):
        got = closed_forms.gamma_quartic_root(0.0, r).gamma
        worst_coth = max(worst_coth, abs(got - 1.0 / math.tanh(2.0 * r)))
    n = 1000 if quick else 10_000
    ratios = 10.0 ** rng.uniform(-3, 3, n)
    rs = rng.uniform(0.01, 2.5, n)
    worst_resid = max(
        closed_forms.gamma_quartic_root(ratio, r).residual for ratio, r in zip(ratios, rs)
    )
    passed = worst_unit <= 1e-12 and worst_coth <= 1e-9 and worst_resid <= 1e-10
    return CheckResult(
        "quartic-root", passed,
        {"max_unit_err": worst_unit, "max_coth_err": worst_coth, "max_residual": worst_resid},
    )


def check_envelope_gap(quick: bool = False, perturb: float = 0.0) -> CheckResult:
    """Numeric envelope reconstruction vs the analytic curve for (0.35, 0.69).

    Support-sampled points (one per weight ratio, best configuration) must
    match the closed form within 1e-3 relative and never dip below it by more
    than 1e-9.  ``perturb`` scales the reference curve; any nonzero value is
    a fault-injection hook that must make this check fail.
    """
    r1, r2 = 0.35, 0.69
    if quick:
        w_grid, t_grid, phi_grid = _envelope_grids(r1, r2, 20, 9)
    else:
        w_grid, t_grid, phi_grid = _envelope_grids(r1, r2, 50, 25)
    points = regions.envelope_support_points(r1, r2, t_grid, phi_grid, w_grid)
    v_x = np.array([p.v_x for p in points])
    v_y = np.array([p.v_y for p in points])
    reference = np.array(
        [closed_forms.two_mode_envelope(v, r1, r2).v_y for v in v_x]
    ) * (1.0 + perturb)
    rel = (v_y - reference) / reference
    max_gap = float(np.max(np.abs(rel)))
    dip = float(np.min(v_y - reference))
    passed = max_gap <= 1e-3 and dip >= -1e-9
    return CheckResult(
        "envelope-gap", passed,
        {"n_points": len(points), "max_rel_gap": max_gap, "largest_dip": dip},
    )


def check_reference_point_values(quick: bool = False) -> CheckResult:
    """Spot values: balanced point, single-mode equal-weight bound, one-squeezer point."""
    r6db = 0.5 * math.log(4.0)  # e^{-2r} = 1/4
    balanced = closed_forms.example2_parametric(-math.sqrt(2.0) * math.exp(-r6db), r6db, 0.5)
    ok_balanced = abs(balanced[0] - 0.5) <= 1e-12 and abs(balanced[1] - 0.5) <= 1e-12

    r3db = 0.5 * math.log(2.0)
    line = closed_forms.single_mode_line(1.0, 1.0, r3db, math.pi / 6.0)
    ok_line = abs(line - 4.5) <= 1e-12

    f2 = 0.25
    r2 = -0.5 * math.log(f2)
    value = closed_forms.example1_relations(2.0 * f2, 2.0, r2, which="x-favoured")
    ok_example1 = abs(value - 1.0) <= 1e-12
    passed = ok_balanced and ok_line and ok_example1
    return CheckResult(
        "reference-point-values", passed,
        {"balanced": balanced, "single_mode_line": line, "example1_relation": value},
    )


def _mc_reports(shots: int, seed: int):
    """The simulation test matrix: (label, report, probe weights, bound, optimal)."""
    r6db = 0.5 * math.log(4.0)
    theta = ChannelParams(0.3, -0.1)
    rows = []

    scheme = build_scheme("balanced", r=r6db, t_star=0.5)
    report = run_scheme(scheme, scheme.probe, theta, shots, seed)
    rows.append(("balanced-optimal", scheme, report, Weights(1.0, 1.0), (0.5, 0.5), True))

    scheme = build_scheme("example1", r2=math.log(2.0), t=1.0 / 3.0, phi2=0.0)
    report = run_scheme(scheme, scheme.probe, theta, shots, seed + 1)
    rows.append(("example1", scheme, report, Weights(1.0, 1.0), (0.75, 1.5), False))

    scheme = build_scheme("balanced", r=r6db, t_star=0.9)
    report = run_scheme(scheme, scheme.probe, theta, shots, seed + 2)
    rows.append(("balanced-suboptimal", scheme, report, Weights(1.0, 1.0), None, False))

    scheme = build_scheme("balanced", r=0.0, t_star=0.5)
    report = run_scheme(scheme, scheme.probe, theta, shots, seed + 3)
    rows.append(("vacuum-dual-homodyne", scheme, report, Weights(1.0, 1.0), (2.0, 2.0), True))
    return rows


def check_monte_carlo_achievability(quick: bool = False, shots: int = 1_000_000,
                                    seed: int = 20240816) -> CheckResult:
    """Empirical variances of the reference schemes hit their targets within 5 SE."""
    if quick:
        shots = min(shots, 200_000)
    detail = {}
    passed = True
    for label, scheme, report, _, targets, _ in _mc_reports(shots, seed):
        if targets is None:
            continue
        for got, se, want, tag in (
            (report.var_x, report.se_var_x, targets[0], "v_x"),
            (report.var_y, report.se_var_y, targets[1], "v_y"),
        ):
            ok = abs(got - want) <= 5.0 * se
            passed &= ok
            detail[f"{label}.{tag}"] = {"got": got, "want": want, "se": se, "ok": ok}
    # Estimator bias at two displacement values.
    r6db = 0.5 * math.log(4.0)
    scheme = build_scheme("balanced", r=r6db, t_star=0.5)
    for k, theta in enumerate((ChannelParams(0.0, 0.0), ChannelParams(0.5, 0.5))):
        report = run_scheme(scheme, scheme.probe, theta, shots, seed + 10 + k)
        for got, want, se, tag in (
            (report.mean_x, theta.theta_x, report.se_mean_x, "mean_x"),
            (report.mean_y, theta.theta_y, report.se_mean_y, "mean_y"),
        ):
            ok = abs(got - want) <= 5.0 * se
            passed &= ok
            detail[f"bias{k}.{tag}"] = {"got": got, "want": want, "se": se, "ok": ok}
    return CheckResult("monte-carlo-achievability", passed, detail)


def check_no_bound_violation(quick: bool = False, shots: int = 1_000_000,
                             seed: int = 20240816) -> CheckResult:
    """No simulated scheme beats the bound for its own probe (5 SE margin)."""
    if quick:
        shots = min(shots, 200_000)
    detail = {}
    passed = True
    for label, scheme, report, weights, _, optimal in _mc_reports(shots, seed):
        bound = solve(build_probe(scheme.probe).cov, weights).f_hcr
        cmp = compare_to_bound(report, bound, weights, expect_saturation=optimal)
        passed &= cmp.ok
        detail[label] = {
            "weighted_sum": cmp.weighted_sum,
            "bound": cmp.bound,
            "no_violation": cmp.no_violation,
            "saturates": cmp.saturates,
        }
    return CheckResult("no-bound-violation", passed, detail)


def check_sql_threshold(quick: bool = False) -> CheckResult:
    """Feasibility of beating the SQL flips as the squeezed-variance product crosses 1/4."""
    r_above = -0.5 * math.log(0.51)  # e^{-2r1} e^{-2r2} = 0.2601
    r_below = -0.5 * math.log(0.49)  # e^{-2r1} e^{-2r2} = 0.2401
    above = regions.sql_feasible(r_above, r_above)
    below = regions.sql_feasible(r_below, r_below)
    witness_ok = (
        below.feasible
        and below.witness_v_x < 1.0
        and below.witness_v_y < 1.0
        and abs(
            closed_forms.two_mode_envelope(below.witness_v_x, r_below, r_below).v_y
            - below.witness_v_y
        ) <= 1e-12
    )
    corollary = closed_forms.scalar_corollaries(r_below, r_below).sql_feasible
    corollary_above = closed_forms.scalar_corollaries(r_above, r_above).sql_feasible
    passed = (not above.feasible) and witness_ok and corollary and not corollary_above
    return CheckResult(
        "sql-threshold", passed,
        {"above_feasible": above.feasible, "below_feasible": below.feasible},
    )


def check_structural_properties(quick: bool = False, seed: int = 11) -> CheckResult:
    """Randomized structural invariants of the transforms, envelope, and bound."""
    rng = np.random.default_rng(seed)
    n = 200 if quick else 1000
    detail = {}

    # Symplectic preservation under random composition.
    worst = 0.0
    omega = symplectic_form(2)
    for _ in range(n):
        s = rotation(rng.uniform(0, 2 * math.pi), 2, 0).matrix
        s = beam_splitter(rng.uniform(0, 1)).matrix @ s
        s = rotation(rng.uniform(0, 2 * math.pi), 2, 1).matrix @ s
        s = beam_splitter(rng.uniform(0, 1)).matrix @ s
        worst = max(worst, float(np.max(np.abs(s @ omega @ s.T - omega))))
    detail["symplectic_defect"] = worst
    ok_symplectic = worst <= 1e-10

    # Envelope continuity at the knees and x<->y symmetry.
    worst_cont = 0.0
    worst_sym = 0.0
    for _ in range(n):
        r1, r2 = np.sort(rng.uniform(0.01, 2.0, 2))
        v_c = closed_forms.envelope_v_c(r1, r2)
        v_d = closed_forms.envelope_v_d(r1, r2)
        low_at_c = v_c * math.exp(-2.0 * r1) / (v_c - math.exp(-2.0 * r2))
        mid_at_c = closed_forms.two_mode_envelope(v_c, r1, r2).v_y
        mid_at_d = closed_forms.two_mode_envelope(v_d, r1, r2).v_y
        high_at_d = v_d * math.exp(-2.0 * r2) / (v_d - math.exp(-2.0 * r1))
        worst_cont = max(worst_cont, abs(low_at_c - mid_at_c), abs(high_at_d - mid_at_d))
        v_x = math.exp(-2.0 * r2) + 10.0 ** rng.uniform(-2, 1)
        v_y = closed_forms.two_mode_envelope(v_x, r1, r2).v_y
        back = closed_forms.two_mode_envelope(v_y, r1, r2).v_y
        worst_sym = max(worst_sym, abs(back - v_x))
    detail["envelope_continuity"] = worst_cont
    detail["envelope_symmetry"] = worst_sym
    ok_envelope = worst_cont <= 1e-9 and worst_sym <= 1e-9

    # Weight-scaling linearity of the bound.
    covs = np.empty((n, 4, 4))
    for i in range(n):
        r1, r2 = np.sort(rng.uniform(0.0, 1.2, 2))
        probe = ProbeConfig(
            r1=r1, r2=r2, phi1=rng.uniform(0, math.pi), phi2=rng.uniform(0, math.pi),
            t=rng.uniform(0, 1),
        )
        covs[i] = build_probe(probe).cov
    w_x = 10.0 ** rng.uniform(-1, 1, n)
    w_y = 10.0 ** rng.uniform(-1, 1, n)
    scale = 10.0 ** rng.uniform(-2, 2, n)
    base = batch_bound(covs, w_x, w_y)
    scaled = batch_bound(covs, scale * w_x, scale * w_y)
    worst_scale = float(np.max(np.abs(scaled - scale * base) / (scale * base)))
    detail["weight_scaling"] = worst_scale
    ok_scaling = worst_scale <= 1e-12

    passed = ok_symplectic and ok_envelope and ok_scaling
    return CheckResult("structural-properties", passed, detail)


_ALL_CHECKS = (
    check_single_mode_closed_form,
    check_equal_squeezing_optimum,
    check_weight_special_cases,
    check_quartic_root,
    check_envelope_gap,
    check_reference_point_values,
    check_monte_carlo_achievability,
    check_no_bound_violation,
    check_sql_threshold,
    check_structural_properties,
)


def run_verification(
    only: str | None = None,
    quick: bool = False,
    perturb_envelope: float = 0.0,
    shots: int = 1_000_000,
    seed: int = 20240816,
) -> list[CheckResult]:
    """Run the named cross-checks, optionally filtered by substring."""
    results = []
    for fn in _ALL_CHECKS:
        name = fn.__name__.removeprefix("check_").replace("_", "-")
        if only and only not in name:
            continue
        if fn is check_envelope_gap:
            results.append(fn(quick=quick, perturb=perturb_envelope))
        elif fn in (check_monte_carlo_achievability, check_no_bound_violation):
            results.append(fn(quick=quick, shots=shots, seed=seed))
        else:
            results.append(fn(quick=quick))
    return results
