import math

import numpy as np
import pytest

from qbound.gaussian import (
    ChannelParams,
    GaussianState,
    ProbeConfig,
    apply,
    beam_splitter,
    build_probe,
    displace,
    make_squeezed,
    r_to_squeezing_db,
    rotation,
    squeezing_db_to_r,
    symplectic_eigenvalues,
    symplectic_form,
    tensor,
    vacuum,
    validate,
)

R_3DB = 0.5 * math.log(2.0)  # e^{-2r} = 1/2


def test_symplectic_form_properties():
    for n in (1, 2):
        omega = symplectic_form(n)
        assert np.array_equal(omega.T, -omega)
        assert np.allclose(omega @ omega, -np.eye(2 * n))


def test_make_squeezed_vacuum():
    state = make_squeezed(0.0, 1.3)
    assert np.allclose(state.cov, np.eye(2))
    assert np.array_equal(state.mean, np.zeros(2))


def test_make_squeezed_axis_aligned():
    state = make_squeezed(R_3DB, 0.0)
    assert np.allclose(state.cov, np.diag([0.5, 2.0]), atol=1e-15)


def test_make_squeezed_rotated_pi_over_6():
    state = make_squeezed(R_3DB, math.pi / 6.0)
    off = -3.0 * math.sqrt(3.0) / 8.0  # (e^{-2r} - e^{2r}) sin cos at 3 dB
    expected = np.array([[0.875, off], [off, 1.625]])
    assert np.allclose(state.cov, expected, atol=1e-14)
    # diagonal entries are the projected variances for any rotation convention
    assert state.cov[0, 0] == pytest.approx(0.5 * 0.75 + 2.0 * 0.25)
    assert state.cov[1, 1] == pytest.approx(0.5 * 0.25 + 2.0 * 0.75)


@pytest.mark.parametrize("bad", [-0.1, math.inf, math.nan, 25.0])
def test_make_squeezed_rejects_bad_r(bad):
    with pytest.raises(ValueError):
        make_squeezed(bad, 0.0)


def test_rotation_identity_and_swap():
    assert np.allclose(rotation(0.0).matrix, np.eye(2))
    swapped = rotation(math.pi / 2.0).matrix @ np.diag([0.5, 2.0]) @ rotation(math.pi / 2.0).matrix.T
    assert np.allclose(swapped, np.diag([2.0, 0.5]), atol=1e-15)


def test_rotation_block_on_mode_one_of_two():
    s = rotation(math.pi / 6.0, n_modes=2, target_mode=0).matrix
    c, sn = math.cos(math.pi / 6.0), math.sin(math.pi / 6.0)
    assert np.allclose(s[:2, :2], [[c, -sn], [sn, c]])
    assert np.allclose(s[2:, 2:], np.eye(2))
    assert np.allclose(s[:2, 2:], 0.0)


def test_rotation_bad_mode_index():
    with pytest.raises(ValueError):
        rotation(0.1, n_modes=2, target_mode=2)


def test_beam_splitter_identity_and_vacuum():
    assert np.allclose(beam_splitter(1.0).matrix, np.eye(4))
    out = apply(beam_splitter(0.5), vacuum(2))
    assert np.allclose(out.cov, np.eye(4))


def test_beam_splitter_balanced_orthogonal_squeezers():
    r = 0.7
    inputs = tensor(make_squeezed(r, 0.0), make_squeezed(r, math.pi / 2.0))
    out = apply(beam_splitter(0.5), inputs)
    ch = math.cosh(2.0 * r)
    assert np.allclose(out.cov[:2, :2], ch * np.eye(2), atol=1e-12)
    assert np.allclose(out.cov[2:, 2:], ch * np.eye(2), atol=1e-12)


@pytest.mark.parametrize("bad", [-0.01, 1.01])
def test_beam_splitter_range(bad):
    with pytest.raises(ValueError):
        beam_splitter(bad)


def test_tensor_examples():
    assert np.allclose(tensor(vacuum(1), vacuum(1)).cov, np.eye(4))
    block = tensor(make_squeezed(0.4, 0.0), vacuum(1)).cov
    assert np.allclose(block[:2, :2], np.diag([math.exp(-0.8), math.exp(0.8)]))
    assert np.allclose(block[2:, 2:], np.eye(2))
    assert np.allclose(block[:2, 2:], 0.0)
    joined = tensor(
        GaussianState([1.0, 2.0], np.eye(2)), GaussianState([3.0, 4.0], np.eye(2))
    )
    assert np.array_equal(joined.mean, [1.0, 2.0, 3.0, 4.0])


def test_apply_identity_and_rotation():
    state = make_squeezed(R_3DB, 0.0)
    same = apply(rotation(0.0), state)
    assert np.allclose(same.cov, state.cov)
    rotated = apply(rotation(math.pi / 2.0), state)
    assert np.allclose(rotated.cov, np.diag([2.0, 0.5]), atol=1e-15)


def test_apply_beam_splitter_matches_direct_matrix_product():
    # Independent oracle: build the 4x4 transform and input covariance by hand
    # and carry out the congruence entry by entry.
    r1, r2, t = 0.35, 0.69, 0.4
    inputs = tensor(make_squeezed(r1, 0.0), make_squeezed(r2, math.pi / 2.0))
    got = apply(beam_splitter(t), inputs)

    a, b = math.sqrt(t), math.sqrt(1.0 - t)
    s = np.array(
        [
            [a, 0.0, b, 0.0],
            [0.0, a, 0.0, b],
            [-b, 0.0, a, 0.0],
            [0.0, -b, 0.0, a],
        ]
    )
    sigma_in = np.zeros((4, 4))
    sigma_in[0, 0], sigma_in[1, 1] = math.exp(-2 * r1), math.exp(2 * r1)
    sigma_in[2, 2], sigma_in[3, 3] = math.exp(2 * r2), math.exp(-2 * r2)
    expected = np.zeros((4, 4))
    for i in range(4):
        for j in range(4):
            expected[i, j] = sum(
                s[i, k] * sigma_in[k, l] * s[j, l] for k in range(4) for l in range(4)
            )
    assert np.allclose(got.cov, expected, atol=1e-12)


def test_apply_dimension_mismatch():
    with pytest.raises(ValueError):
        apply(beam_splitter(0.5), vacuum(1))


def test_build_probe_vacuum():
    probe = build_probe(ProbeConfig(r1=0.0, r2=0.0, phi1=0.3, phi2=1.2, t=0.7))
    assert np.allclose(probe.cov, np.eye(4))
    assert np.array_equal(probe.mean, np.zeros(4))


def test_build_probe_mode_one_marginals():
    r, t = 0.8, 0.37
    probe = build_probe(ProbeConfig(r1=0.0, r2=r, phi1=0.0, phi2=math.pi / 2.0, t=t))
    assert probe.cov[0, 0] == pytest.approx(t + (1 - t) * math.exp(2 * r), rel=1e-12)
    assert probe.cov[1, 1] == pytest.approx(t + (1 - t) * math.exp(-2 * r), rel=1e-12)


def test_build_probe_balanced_marginals():
    r = 0.6
    probe = build_probe(ProbeConfig(r1=r, r2=r, phi1=0.0, phi2=math.pi / 2.0, t=0.5))
    ch = math.cosh(2 * r)
    assert np.allclose(probe.cov[:2, :2], ch * np.eye(2), atol=1e-12)
    assert np.allclose(probe.cov[2:, 2:], ch * np.eye(2), atol=1e-12)


def test_build_probe_is_pure():
    rng = np.random.default_rng(3)
    for _ in range(25):
        r1, r2 = np.sort(rng.uniform(0.0, 1.5, 2))
        probe = build_probe(
            ProbeConfig(
                r1=r1, r2=r2, phi1=rng.uniform(0, math.pi),
                phi2=rng.uniform(0, math.pi), t=rng.uniform(0, 1),
            )
        )
        # eigenvalue oracle: |eigs of i Omega Sigma| come in pairs at nu = 1
        omega = symplectic_form(2)
        nus = np.abs(np.linalg.eigvals(1j * omega @ probe.cov))
        assert np.max(np.abs(nus - 1.0)) < 1e-9


def test_displace_examples():
    state = displace(vacuum(1), ChannelParams(0.0, 0.0))
    assert np.array_equal(state.mean, np.zeros(2))
    state = displace(vacuum(1), ChannelParams(0.3, -0.1))
    assert np.allclose(state.mean, [0.3, -0.1])
    assert np.allclose(state.cov, np.eye(2))
    probe = displace(build_probe(ProbeConfig(r1=0.1, r2=0.4, t=0.5)), ChannelParams(1.0, 2.0))
    assert np.allclose(probe.mean, [1.0, 2.0, 0.0, 0.0])


def test_displace_commutes_with_passive_on_other_mode():
    theta = ChannelParams(0.7, -0.2)
    passive = rotation(1.1, n_modes=2, target_mode=1)
    state = build_probe(ProbeConfig(r1=0.2, r2=0.9, phi1=0.3, phi2=1.0, t=0.6))
    one = displace(apply(passive, state), theta)
    other = apply(passive, displace(state, theta))
    assert np.allclose(one.mean, other.mean, atol=1e-14)
    assert np.allclose(one.cov, other.cov, atol=1e-14)


def test_validate_vacuum_and_unphysical():
    good = validate(vacuum(1))
    assert good.is_physical and good.is_pure
    assert good.min_physicality_eig == pytest.approx(0.0, abs=1e-12)

    bad = validate(GaussianState(np.zeros(2), 0.5 * np.eye(2)))
    assert not bad.is_physical
    assert bad.min_physicality_eig == pytest.approx(-0.5, abs=1e-12)


def test_validate_probe_outputs():
    diag = validate(build_probe(ProbeConfig(r1=0.3, r2=1.1, phi1=0.2, phi2=1.4, t=0.25)))
    assert diag.is_physical and diag.is_pure
    assert diag.symmetry_defect <= 1e-12


def test_symplectic_invariant_under_composition():
    rng = np.random.default_rng(8)
    omega = symplectic_form(2)
    for _ in range(100):
        s = beam_splitter(rng.uniform(0, 1)).matrix
        s = rotation(rng.uniform(0, 2 * math.pi), 2, rng.integers(0, 2)).matrix @ s
        s = beam_splitter(rng.uniform(0, 1)).matrix @ s
        assert np.max(np.abs(s @ omega @ s.T - omega)) <= 1e-10


def test_probe_config_validation():
    with pytest.raises(ValueError):
        ProbeConfig(r1=0.9, r2=0.3)  # canonical ordering
    with pytest.raises(ValueError):
        ProbeConfig(r1=0.1, r2=0.2, t=1.5)
    with pytest.raises(ValueError):
        ProbeConfig(r1=-0.1, r2=0.2)
    with pytest.raises(ValueError):
        ProbeConfig(r1=0.1, r2=0.2, n_modes=3)


def test_db_conversion_round_trip():
    db = 10.0 * math.log10(2.0)  # exactly e^{-2r} = 1/2
    assert squeezing_db_to_r(db) == pytest.approx(R_3DB, rel=1e-14)
    assert r_to_squeezing_db(squeezing_db_to_r(7.3)) == pytest.approx(7.3, rel=1e-12)


def test_symplectic_eigenvalues_thermal_like():
    nus = symplectic_eigenvalues(2.5 * np.eye(4))
    assert np.allclose(nus, [2.5, 2.5])


def test_state_rejects_asymmetric_cov():
    cov = np.array([[1.0, 1e-6], [0.0, 1.0]])
    with pytest.raises(ValueError):
        GaussianState(np.zeros(2), cov)
