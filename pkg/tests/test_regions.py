import math
import os

import numpy as np
import pytest

from qbound import closed_forms as cf
from qbound import regions
from qbound.gaussian import ProbeConfig, build_probe
from qbound.holevo import Weights, solve


def test_boundary_single_mode_equal_weights():
    r = 0.7
    probe = ProbeConfig(r1=r, phi1=0.3, n_modes=1)
    samples = regions.boundary_for_config(probe, [1.0])
    assert len(samples) == 1
    point = samples[0]
    assert point.v_x + point.v_y == pytest.approx(2.0 * (1.0 + math.cosh(2 * r)), rel=1e-8)
    assert point.converged


def test_boundary_vacuum_two_mode_hyperbola():
    probe = ProbeConfig(r1=0.0, r2=0.0, t=0.5)
    samples = regions.boundary_for_config(probe, np.geomspace(0.1, 10.0, 9))
    for s in samples:
        assert 1.0 / s.v_x + 1.0 / s.v_y == pytest.approx(1.0, rel=1e-7)


def test_boundary_polyline_is_monotone():
    probe = ProbeConfig(r1=0.35, r2=0.69, phi1=0.0, phi2=math.pi / 2, t=0.4)
    samples = regions.boundary_for_config(probe, np.geomspace(0.05, 20.0, 21))
    xs = [s.v_x for s in samples]
    ys = [s.v_y for s in samples]
    assert all(b > a for a, b in zip(xs, xs[1:]))
    assert all(b < a for a, b in zip(ys, ys[1:]))


def test_boundary_tangency_matches_dual_formula():
    # independent oracle: the tangency follows from the optimal duals as
    # v_x = Re Z_11 + sqrt(w_y/w_x) |Im Z_12| (and mirrored for v_y)
    probe = ProbeConfig(r1=0.35, r2=0.69, phi1=0.0, phi2=math.pi / 2, t=0.4)
    ratio = 1.0
    point = regions.boundary_for_config(probe, [ratio])[0]
    res = solve(build_probe(probe).cov, Weights(0.5, 0.5))
    assert point.v_x == pytest.approx(res.v_x, rel=1e-6)
    assert point.v_y == pytest.approx(res.v_y, rel=1e-6)
    # the point dominates the full-resource envelope
    envelope_v_y = cf.two_mode_envelope(point.v_x, 0.35, 0.69).v_y
    assert point.v_y >= envelope_v_y - 1e-9


def test_envelope_vacuum_is_the_unit_hyperbola():
    samples = regions.envelope(
        0.0, 0.0, np.linspace(0.2, 0.8, 4), np.linspace(0.0, math.pi / 2, 3),
        np.geomspace(0.2, 5.0, 9),
    )
    assert len(samples) >= 5
    for s in samples:
        assert 1.0 / s.v_x + 1.0 / s.v_y == pytest.approx(1.0, rel=1e-7)


def test_envelope_never_below_closed_form():
    samples = regions.envelope(
        0.35, 0.69, np.linspace(0.05, 0.95, 12), np.linspace(0.0, math.pi / 2, 7),
        np.geomspace(0.03, 30.0, 15),
    )
    for s in samples:
        reference = cf.two_mode_envelope(s.v_x, 0.35, 0.69).v_y
        assert s.v_y >= reference - 1e-9


def test_envelope_refinement_is_monotone():
    # nested grids: the fine sweep contains the coarse one, so the lower hull
    # can only move toward the analytic envelope
    r1, r2 = 0.2, 0.6
    t_fine = np.linspace(0.05, 0.95, 19)
    phi_fine = np.linspace(0.0, math.pi / 2, 7)
    w_fine = np.geomspace(0.05, 20.0, 17)
    fine = regions.envelope(r1, r2, t_fine, phi_fine, w_fine)
    coarse = regions.envelope(r1, r2, t_fine[::2], phi_fine[::2], w_fine[::2])
    v_probe = np.geomspace(math.exp(-2 * r2) * 1.3, 4.0, 25)
    fine_vals = regions.envelope_value(fine, v_probe)
    coarse_vals = regions.envelope_value(coarse, v_probe)
    assert np.all(fine_vals <= coarse_vals + 1e-12)


def test_envelope_middle_segment_is_the_constant_sum_line():
    # distinct squeezing levels give a non-degenerate middle segment; the
    # equal-weight family with phi2 = phi1 + pi/2 sweeps along it
    r1, r2 = 0.3, 0.8
    w_grid = np.geomspace(0.25, 4.0, 9)
    amp = math.exp(-r1) * np.sqrt(w_grid)
    t_grid = np.unique(amp / (amp + math.exp(-r2)))
    samples = regions.envelope(r1, r2, t_grid, np.linspace(0.0, math.pi / 2, 13), w_grid)
    total = (math.exp(-r1) + math.exp(-r2)) ** 2
    v_c, v_d = cf.envelope_v_c(r1, r2), cf.envelope_v_d(r1, r2)
    inside = [s for s in samples if 1.02 * v_c <= s.v_x <= 0.98 * v_d]
    assert len(inside) >= 3
    for s in inside:
        assert s.v_x + s.v_y >= total - 1e-9
    # the equal-weight family at its optimal splitting ratio sweeps the
    # segment exactly as phi1 varies
    t_star = math.exp(-r1) / (math.exp(-r1) + math.exp(-r2))
    on_line = [s for s in inside if s.w_ratio == 1.0 and abs(s.t - t_star) < 1e-9]
    assert len(on_line) >= 3
    for s in on_line:
        assert s.v_x + s.v_y == pytest.approx(total, rel=1e-9)
    # and the reconstructed lower boundary tracks the line across the segment
    probes = np.linspace(1.05 * v_c, 0.95 * v_d, 9)
    hull_vals = regions.envelope_value(samples, probes)
    assert np.all(hull_vals + probes >= total - 1e-9)
    assert np.max(np.abs(hull_vals + probes - total) / total) <= 2e-3


def test_envelope_support_points_track_closed_form():
    r1, r2 = 0.35, 0.69
    w_grid = np.geomspace(0.05, 20.0, 15)
    amp = math.exp(-r1) * np.sqrt(w_grid)
    t_grid = np.unique(amp / (amp + math.exp(-r2)))
    pts = regions.envelope_support_points(r1, r2, t_grid, np.linspace(0, math.pi / 2, 9), w_grid)
    assert len(pts) == len(w_grid)
    for p in pts:
        reference = cf.two_mode_envelope(p.v_x, r1, r2).v_y
        assert p.v_y >= reference - 1e-9
        assert p.v_y == pytest.approx(reference, rel=1e-3)


def test_envelope_exhaustive_phi2_agrees_with_orthogonal_rule():
    # sweeping phi2 independently never improves on phi2 = phi1 + pi/2
    r1, r2 = 0.3, 0.8
    t_grid = np.linspace(0.2, 0.8, 5)
    phi_grid = np.linspace(0.0, math.pi / 2, 5)
    w_grid = np.geomspace(0.2, 5.0, 7)
    orthogonal = regions.envelope(r1, r2, t_grid, phi_grid, w_grid)
    exhaustive = regions.envelope(r1, r2, t_grid, phi_grid, w_grid, sweep_phi2=True)
    v_probe = np.geomspace(math.exp(-2 * r2) * 1.5, 3.0, 11)
    assert np.all(
        regions.envelope_value(exhaustive, v_probe)
        >= regions.envelope_value(orthogonal, v_probe) - 1e-9
    )


def test_envelope_value_requires_points():
    with pytest.raises(ValueError):
        regions.envelope_value([], [1.0])


def test_threads_env_does_not_change_results(monkeypatch):
    r1, r2 = 0.2, 0.7
    grids = (np.linspace(0.1, 0.9, 6), np.linspace(0.0, math.pi / 2, 5), np.geomspace(0.1, 10, 9))
    monkeypatch.setenv("QBOUND_THREADS", "1")
    one = regions.envelope(r1, r2, *grids)
    monkeypatch.setenv("QBOUND_THREADS", "3")
    three = regions.envelope(r1, r2, *grids)
    assert one == three


def test_sql_feasible_threshold():
    r = R = 0.5 * math.log(4.0)
    result = regions.sql_feasible(r, r)
    assert result.feasible
    assert result.witness_v_x == pytest.approx(0.5)
    assert result.witness_v_y == pytest.approx(0.5)

    assert not regions.sql_feasible(0.0, 0.0).feasible

    r51 = -0.5 * math.log(0.51)
    assert not regions.sql_feasible(r51, r51).feasible
    r49 = -0.5 * math.log(0.49)
    assert regions.sql_feasible(r49, r49).feasible


def test_closed_form_boundary_segments():
    rows = regions.closed_form_boundary(0.35, 0.69, np.geomspace(0.26, 10.0, 40))
    segs = {r.segment for r in rows}
    assert segs == {"low", "middle", "high"}
    assert all(rows[i].v_x < rows[i + 1].v_x for i in range(len(rows) - 1))


def test_single_mode_boundary_curve():
    rows = regions.single_mode_boundary(0.4, 0.0, np.linspace(0.6, 8.0, 15))
    for row in rows:
        v_a, v_b = cf.projected_variances(0.4, 0.0)
        assert (row.v_y - v_b) * (row.v_x - v_a) == pytest.approx(1.0, rel=1e-10)
