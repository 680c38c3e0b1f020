import math

import numpy as np
import pytest

from qbound import closed_forms as cf
from qbound.gaussian import ProbeConfig, build_probe, make_squeezed, vacuum
from qbound.holevo import (
    DualCoefficients,
    Weights,
    batch_bound,
    extract_measurement,
    objective,
    single_mode_closed,
    solve,
    unbiased_constraints,
)

R_3DB = 0.5 * math.log(2.0)
R_6DB = 0.5 * math.log(4.0)

# Frozen value of the brute-force grid + compass/pattern refinement oracle for
# the probe (r1=0.35, r2=0.69, phi1=0, phi2=pi/2, t=0.4) at equal weights,
# recorded before the solver was built (three seeds agreed to 6e-9).
FIG2B_ORACLE = 1.584501315277131


def fig2b_cov():
    return build_probe(ProbeConfig(r1=0.35, r2=0.69, phi1=0.0, phi2=math.pi / 2, t=0.4)).cov


def test_weights_validation():
    with pytest.raises(ValueError):
        Weights(-1.0, 1.0)
    with pytest.raises(ValueError):
        Weights(0.0, 0.0)
    assert Weights(2.0, 8.0).geometric == pytest.approx(4.0)


def test_unbiased_constraints_shapes():
    one = unbiased_constraints(1)
    assert one.n_free == 0
    assert np.array_equal(one.c_x_fixed, [1.0, 0.0])
    assert np.array_equal(one.c_y_fixed, [0.0, 1.0])
    two = unbiased_constraints(2)
    assert two.n_free == 4
    with pytest.raises(ValueError):
        unbiased_constraints(3)


def test_dual_coefficients():
    duals = DualCoefficients.from_free([0.0, 0.0, 0.0, 0.0])
    assert np.array_equal(duals.c_x, [1.0, 0.0, 0.0, 0.0])
    assert np.array_equal(duals.c_y, [0.0, 1.0, 0.0, 0.0])
    assert duals.commutator() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        DualCoefficients(np.array([1.0, 0.1, 0.0, 0.0]), np.array([0.0, 1.0, 0.0, 0.0]))


def test_objective_single_mode_matches_line():
    for r, phi in ((0.3, 0.0), (R_3DB, math.pi / 6), (1.0, 1.1)):
        cov = make_squeezed(r, phi).cov
        got = objective(cov, Weights(1.0, 1.0), DualCoefficients.single_mode())
        v_a, v_b = cf.projected_variances(r, phi)
        assert got == pytest.approx(v_a + v_b + 2.0, rel=1e-14)
    assert objective(vacuum(1).cov, Weights(1.0, 1.0), DualCoefficients.single_mode()) == 4.0


def test_objective_two_mode_mode_one_duals():
    cov = fig2b_cov()
    w = Weights(0.7, 2.2)
    got = objective(cov, w, DualCoefficients.from_free([0, 0, 0, 0]))
    expected = w.w_x * cov[0, 0] + w.w_y * cov[1, 1] + 2.0 * w.geometric
    assert got == pytest.approx(expected, rel=1e-14)


def test_single_mode_closed_examples():
    assert single_mode_closed(vacuum(1).cov, Weights(1, 1)).f_hcr == pytest.approx(4.0)
    r = 0.6
    cov = make_squeezed(r, 0.0).cov
    assert single_mode_closed(cov, Weights(1, 0)).f_hcr == pytest.approx(math.exp(-2 * r))
    assert single_mode_closed(cov, Weights(0, 1)).f_hcr == pytest.approx(math.exp(2 * r))


def test_solve_single_mode_is_closed_path():
    cov = make_squeezed(0.8, 0.3).cov
    w = Weights(1.3, 0.4)
    assert solve(cov, w).f_hcr == single_mode_closed(cov, w).f_hcr


def test_solve_single_mode_3db():
    res = solve(make_squeezed(R_3DB, math.pi / 6).cov, Weights(1, 1))
    assert res.f_hcr == pytest.approx(4.5, rel=1e-12)
    # cross-check: 2 (1 + cosh 2r) independent of the angle
    assert res.f_hcr == pytest.approx(2.0 * (1.0 + math.cosh(2 * R_3DB)), rel=1e-12)


def test_solve_balanced_two_mode():
    for r in (0.2, R_6DB, 1.0):
        probe = ProbeConfig(r1=r, r2=r, phi1=0.0, phi2=math.pi / 2, t=0.5)
        res = solve(build_probe(probe).cov, Weights(1, 1))
        assert res.f_hcr == pytest.approx(4.0 * math.exp(-2 * r), rel=1e-9)
        assert res.converged


def test_solve_matches_grid_oracle():
    res = solve(fig2b_cov(), Weights(1.0, 1.0))
    assert res.f_hcr == pytest.approx(FIG2B_ORACLE, rel=1e-6)


def test_solve_degenerate_weights_special_case():
    probe = ProbeConfig(r1=R_6DB, r2=R_6DB, phi1=0.0, phi2=math.pi / 2, t=0.5)
    cov = build_probe(probe).cov
    for w in (Weights(1, 0), Weights(0, 1)):
        res = solve(cov, w)
        assert res.f_hcr == pytest.approx(8.0 / 17.0, rel=1e-9)


def test_bound_result_invariant():
    res = solve(fig2b_cov(), Weights(0.8, 1.7))
    w = res.weights
    recomputed = (
        w.w_x * res.z_real[0, 0]
        + w.w_y * res.z_real[1, 1]
        + 2.0 * w.geometric * abs(res.z_imag[0, 1])
    )
    assert res.f_hcr == pytest.approx(recomputed, rel=1e-14)
    assert np.allclose(res.z_real, res.z_real.T)
    assert np.allclose(res.z_imag, -res.z_imag.T)
    # tangency identity w_x v_x + w_y v_y = f
    assert w.w_x * res.v_x + w.w_y * res.v_y == pytest.approx(res.f_hcr, rel=1e-12)


def test_solve_lower_bounds_random_duals():
    rng = np.random.default_rng(6)
    cov = fig2b_cov()
    for w in (Weights(1, 1), Weights(0.3, 2.0)):
        f = solve(cov, w).f_hcr
        for _ in range(100):
            duals = DualCoefficients.from_free(rng.normal(scale=2.0, size=4))
            assert objective(cov, w, duals) >= f - 1e-10


def test_weight_scaling():
    cov = fig2b_cov()
    res = solve(cov, Weights(0.6, 1.9))
    scaled = solve(cov, Weights(3.7 * 0.6, 3.7 * 1.9))
    assert scaled.f_hcr == pytest.approx(3.7 * res.f_hcr, rel=1e-12)


def test_bound_monotone_in_squeezing():
    values = []
    for r in np.linspace(0.0, 1.2, 7):
        probe = ProbeConfig(r1=r, r2=r, phi1=0.0, phi2=math.pi / 2, t=0.5)
        values.append(solve(build_probe(probe).cov, Weights(1, 1)).f_hcr)
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_swap_symmetry():
    rng = np.random.default_rng(12)
    for _ in range(8):
        r1, r2 = np.sort(rng.uniform(0.0, 1.2, 2))
        phi1, phi2 = rng.uniform(0, math.pi / 2, 2)
        t = rng.uniform(0.05, 0.95)
        w_x, w_y = 10.0 ** rng.uniform(-0.7, 0.7, 2)
        direct = solve(
            build_probe(ProbeConfig(r1=r1, r2=r2, phi1=phi1, phi2=phi2, t=t)).cov,
            Weights(w_x, w_y),
        ).f_hcr
        mirrored = solve(
            build_probe(
                ProbeConfig(
                    r1=r1, r2=r2, phi1=math.pi / 2 - phi1, phi2=math.pi / 2 - phi2, t=t
                )
            ).cov,
            Weights(w_y, w_x),
        ).f_hcr
        assert mirrored == pytest.approx(direct, rel=1e-9)


def test_batch_bound_matches_solve():
    rng = np.random.default_rng(19)
    covs, w_x, w_y = [], [], []
    for _ in range(25):
        r1, r2 = np.sort(rng.uniform(0.0, 1.3, 2))
        covs.append(
            build_probe(
                ProbeConfig(
                    r1=r1, r2=r2, phi1=rng.uniform(0, math.pi),
                    phi2=rng.uniform(0, math.pi), t=rng.uniform(0, 1),
                )
            ).cov
        )
        w_x.append(10.0 ** rng.uniform(-1.5, 1.5))
        w_y.append(10.0 ** rng.uniform(-1.5, 1.5))
    values = batch_bound(np.array(covs), np.array(w_x), np.array(w_y))
    for cov, wx, wy, val in zip(covs, w_x, w_y, values):
        assert solve(cov, Weights(wx, wy)).f_hcr == pytest.approx(val, rel=1e-9, abs=1e-12)


def test_extract_measurement_balanced():
    probe = ProbeConfig(r1=R_6DB, r2=R_6DB, phi1=0.0, phi2=math.pi / 2, t=0.5)
    cov = build_probe(probe).cov
    res = solve(cov, Weights(1, 1))
    cert = extract_measurement(res, cov)
    assert cert.certified
    # one X-type and one Y-type homodyne on distinct modes
    assert sorted(cert.scheme.angles) == pytest.approx([0.0, math.pi / 2], abs=1e-9)
    v_x, v_y = cert.scheme.predicted_variances(cov)
    assert v_x + v_y == pytest.approx(res.f_hcr, rel=1e-9)


def test_extract_measurement_random_commuting_optima():
    rng = np.random.default_rng(23)
    for _ in range(10):
        r1, r2 = np.sort(rng.uniform(0.1, 1.1, 2))
        probe = ProbeConfig(
            r1=r1, r2=r2, phi1=rng.uniform(0, math.pi / 2),
            phi2=rng.uniform(0, math.pi), t=rng.uniform(0.1, 0.9),
        )
        cov = build_probe(probe).cov
        w = Weights(1.0, 10.0 ** rng.uniform(-0.8, 0.8))
        res = solve(cov, w)
        cert = extract_measurement(res, cov)
        if not cert.certified:
            continue
        v_x, v_y = cert.scheme.predicted_variances(cov)
        weighted = w.w_x * v_x + w.w_y * v_y
        assert weighted == pytest.approx(res.f_hcr, rel=1e-6)
        assert abs(cert.scheme.angles[0] - cert.scheme.angles[1]) > 1e-6


def test_extract_measurement_example1_angles():
    # one squeezer plus vacuum at equal weights: the homodyne angles are the
    # squeezing angle and its orthogonal complement
    r2 = 0.8
    t = 1.0 / (1.0 + math.exp(r2))
    for phi2 in (0.3, 0.9):
        probe = ProbeConfig(r1=0.0, r2=r2, phi1=0.0, phi2=phi2, t=1.0 - t)
        cov = build_probe(probe).cov
        res = solve(cov, Weights(1, 1))
        cert = extract_measurement(res, cov)
        assert cert.certified
        angles = sorted(a % math.pi for a in cert.scheme.angles)
        assert angles == pytest.approx(
            sorted([phi2 % math.pi, (phi2 + math.pi / 2) % math.pi]), abs=1e-7
        )
        v_x, v_y = cert.scheme.predicted_variances(cov)
        assert v_x + v_y == pytest.approx(res.f_hcr, rel=1e-9)


def test_extract_measurement_single_mode_flags():
    cov = make_squeezed(0.4, 0.0).cov
    res = solve(cov, Weights(1, 1))
    cert = extract_measurement(res, cov)
    assert not cert.certified
    assert "single mode" in cert.reason


def test_solve_reports_tangency_for_degenerate_weights():
    res = solve(fig2b_cov(), Weights(1.0, 0.0))
    assert math.isinf(res.v_y)
    assert res.v_x == pytest.approx(res.f_hcr, rel=1e-12)
