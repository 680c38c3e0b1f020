"""Gaussian states in quadrature representation and symplectic operations.

Conventions used throughout the package:

* quadrature ordering ``(X1, Y1, X2, Y2)`` with commutator ``[X, Y] = 2i``,
* the vacuum covariance matrix is the identity,
* the symplectic form has 2x2 blocks ``[[0, 1], [-1, 0]]`` per mode,
* a squeezed state with parameter ``r`` has quadrature variances
  ``e^{-2r}`` and ``e^{+2r}``, so 3 dB of squeezing means ``e^{-2r} = 1/2``.

With these choices the standard quantum limit sits at unit variance and
squeezing parameters appear in covariance matrices as literal entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Tolerances for structural checks (double precision headroom for 4x4 matrices).
SYMMETRY_TOL = 1e-12
SYMPLECTIC_TOL = 1e-10
PHYSICALITY_EIG_FLOOR = -1e-9
PURITY_TOL = 1e-9

# Squeezing parameters beyond this are far outside any physical regime and
# overflow e^{2r} arithmetic headroom.
MAX_SQUEEZING_R = 20.0

OMEGA_SINGLE_MODE = np.array([[0.0, 1.0], [-1.0, 0.0]])


def symplectic_form(n_modes: int) -> np.ndarray:
    """Return the symplectic form matrix for ``n_modes`` modes.

    Block diagonal with ``[[0, 1], [-1, 0]]`` per mode, encoding
    ``[X, Y] = 2i``.
    """
    omega = np.zeros((2 * n_modes, 2 * n_modes))
    for k in range(n_modes):
        omega[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = OMEGA_SINGLE_MODE
    return omega


def squeezing_db_to_r(db: float) -> float:
    """Convert squeezing in dB to the squeezing parameter r.

    The convention is ``dB = -10 log10(e^{-2r})``, so 3 dB corresponds to a
    squeezed variance of about one half.
    """
    return math.log(10.0 ** (db / 10.0)) / 2.0


def r_to_squeezing_db(r: float) -> float:
    """Convert a squeezing parameter r to dB (inverse of squeezing_db_to_r)."""
    return -10.0 * math.log10(math.exp(-2.0 * r))


def _frozen_array(values, shape=None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"expected array of shape {shape}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GaussianState:
    """A Gaussian state given by its first two quadrature moments.

    Attributes:
        mean: length ``2 n_modes`` vector of quadrature means, ordered
            ``(X1, Y1, X2, Y2)``.
        cov: symmetric ``2n x 2n`` covariance matrix (vacuum = identity).
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mean.ndim != 1 or mean.size % 2 != 0 or mean.size == 0:
            raise ValueError(f"mean must be a vector of even length, got shape {mean.shape}")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"cov shape {cov.shape} does not match mean length {mean.size}")
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL:
            raise ValueError("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        object.__setattr__(self, "mean", _frozen_array(mean))
        object.__setattr__(self, "cov", _frozen_array(cov))

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def mode_marginal(self, mode: int) -> "GaussianState":
        """Return the single-mode marginal state of ``mode`` (0-based)."""
        if not 0 <= mode < self.n_modes:
            raise ValueError(f"mode index {mode} out of range for {self.n_modes} modes")
        sl = slice(2 * mode, 2 * mode + 2)
        return GaussianState(self.mean[sl], self.cov[sl, sl])


@dataclass(frozen=True)
class SymplecticTransform:
    """A linear quadrature map S with S @ Omega @ S.T = Omega."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] % 2 != 0:
            raise ValueError(f"symplectic matrix must be square of even size, got {mat.shape}")
        omega = symplectic_form(mat.shape[0] // 2)
        defect = np.max(np.abs(mat @ omega @ mat.T - omega))
        if defect > SYMPLECTIC_TOL:
            raise ValueError(f"matrix is not symplectic (defect {defect:.3e})")
        object.__setattr__(self, "matrix", _frozen_array(mat))

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    def then(self, other: "SymplecticTransform") -> "SymplecticTransform":
        """Compose transforms: ``self`` first, then ``other``."""
        return SymplecticTransform(other.matrix @ self.matrix)

    def inverse(self) -> "SymplecticTransform":
        omega = symplectic_form(self.n_modes)
        # S^{-1} = -Omega S^T Omega for our convention (Omega^2 = -1).
        return SymplecticTransform(-omega @ self.matrix.T @ omega)


@dataclass(frozen=True)
class ChannelParams:
    """Displacement channel amplitudes on the probed mode."""

    theta_x: float = 0.0
    theta_y: float = 0.0


@dataclass(frozen=True)
class ProbeConfig:
    """Resource description: two squeezed inputs, rotations, and a beam splitter.

    ``r1`` and ``r2`` are the squeezing parameters of the mode-1 and mode-2
    inputs, rotated by ``phi1`` and ``phi2`` before mixing on a beam splitter
    of transmissivity ``t``.  Canonical ordering requires ``0 <= r1 <= r2``
    for two-mode configurations.
    """

    r1: float = 0.0
    r2: float = 0.0
    phi1: float = 0.0
    phi2: float = 0.0
    t: float = 0.5
    n_modes: int = 2

    def __post_init__(self):
        if self.n_modes not in (1, 2):
            raise ValueError(f"n_modes must be 1 or 2, got {self.n_modes}")
        for name in ("r1", "r2"):
            r = getattr(self, name)
            if not np.isfinite(r) or r < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {r}")
            if r > MAX_SQUEEZING_R:
                raise ValueError(f"{name} = {r} exceeds the supported maximum {MAX_SQUEEZING_R}")
        if self.n_modes == 2:
            if self.r1 > self.r2:
                raise ValueError(f"canonical ordering requires r1 <= r2, got ({self.r1}, {self.r2})")
            if not 0.0 <= self.t <= 1.0:
                raise ValueError(f"transmissivity must lie in [0, 1], got {self.t}")


@dataclass(frozen=True)
class StateDiagnostics:
    """Report-only validation of a Gaussian state."""

    symmetry_defect: float
    min_physicality_eig: float
    symplectic_eigenvalues: np.ndarray = field(repr=False)
    is_physical: bool
    is_pure: bool


def vacuum(n_modes: int) -> GaussianState:
    """The n-mode vacuum: zero mean, identity covariance."""
    return GaussianState(np.zeros(2 * n_modes), np.eye(2 * n_modes))


def rotation_matrix(phi: float) -> np.ndarray:
    """Counter-clockwise 2x2 phase-space rotation."""
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def rotation(phi: float, n_modes: int = 1, target_mode: int = 0) -> SymplecticTransform:
    """Phase-space rotation by ``phi`` on ``target_mode``, identity elsewhere."""
    if not 0 <= target_mode < n_modes:
        raise ValueError(f"target_mode {target_mode} out of range for {n_modes} modes")
    mat = np.eye(2 * n_modes)
    sl = slice(2 * target_mode, 2 * target_mode + 2)
    mat[sl, sl] = rotation_matrix(phi)
    return SymplecticTransform(mat)


def beam_splitter(t: float) -> SymplecticTransform:
    """Two-mode beam splitter of transmissivity ``t``.

    Mode-1 output is ``sqrt(t) * mode1 + sqrt(1-t) * mode2`` on both
    quadratures; the mixing is real orthogonal, so it is symplectic.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"transmissivity must lie in [0, 1], got {t}")
    a, b = math.sqrt(t), math.sqrt(1.0 - t)
    eye = np.eye(2)
    mat = np.block([[a * eye, b * eye], [-b * eye, a * eye]])
    return SymplecticTransform(mat)


def make_squeezed(r: float, phi: float = 0.0) -> GaussianState:
    """Pure single-mode squeezed state with variance ``e^{-2r}`` along angle ``phi``.

    The covariance matrix is ``R(phi) diag(e^{-2r}, e^{2r}) R(phi)^T`` with
    ``R`` the counter-clockwise rotation, so the X/Y variances are
    ``e^{-2r} cos^2(phi) + e^{2r} sin^2(phi)`` and the same with sin and cos
    swapped.
    """
    if not np.isfinite(r) or r < 0.0:
        raise ValueError(f"squeezing parameter must be finite and >= 0, got {r}")
    if r > MAX_SQUEEZING_R:
        raise ValueError(f"r = {r} exceeds the supported maximum {MAX_SQUEEZING_R}")
    rot = rotation_matrix(phi)
    cov = rot @ np.diag([math.exp(-2.0 * r), math.exp(2.0 * r)]) @ rot.T
    return GaussianState(np.zeros(2), cov)


def tensor(a: GaussianState, b: GaussianState) -> GaussianState:
    """Tensor product: concatenated means, block-diagonal covariance."""
    n = a.mean.size + b.mean.size
    mean = np.concatenate([a.mean, b.mean])
    cov = np.zeros((n, n))
    cov[: a.mean.size, : a.mean.size] = a.cov
    cov[a.mean.size :, a.mean.size :] = b.cov
    return GaussianState(mean, cov)


def apply(transform: SymplecticTransform, state: GaussianState) -> GaussianState:
    """Apply a symplectic transform: mean -> S mean, cov -> S cov S^T."""
    if transform.matrix.shape[0] != state.mean.size:
        raise ValueError(
            f"transform acts on {transform.n_modes} modes but state has {state.n_modes}"
        )
    s = transform.matrix
    return GaussianState(s @ state.mean, s @ state.cov @ s.T)


def build_probe(config: ProbeConfig) -> GaussianState:
    """Assemble the probe state described by a ProbeConfig.

    For two modes: squeeze both inputs, rotate them by ``phi1`` and ``phi2``,
    and mix them on a beam splitter of transmissivity ``t``.  Single-mode
    configurations just return the rotated squeezed state.
    """
    if config.n_modes == 1:
        return make_squeezed(config.r1, config.phi1)
    inputs = tensor(make_squeezed(config.r1, config.phi1), make_squeezed(config.r2, config.phi2))
    return apply(beam_splitter(config.t), inputs)


def displace(state: GaussianState, theta: ChannelParams) -> GaussianState:
    """Displacement channel on mode 1: shifts (X1, Y1) means by (theta_x, theta_y)."""
    if state.n_modes < 1:
        raise ValueError("state must have at least one mode")
    shift = np.zeros_like(state.mean)
    shift[0] = theta.theta_x
    shift[1] = theta.theta_y
    return GaussianState(state.mean + shift, state.cov)


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues of a covariance matrix (each appears once, sorted).

    Pure states have all symplectic eigenvalues equal to 1 in our convention.
    """
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0] // 2
    omega = symplectic_form(n)
    evs = np.abs(np.linalg.eigvals(1j * omega @ cov))
    return np.sort(evs)[::2]  # each value appears twice


def validate(state: GaussianState) -> StateDiagnostics:
    """Report symmetry defect, physicality eigenvalue, and purity (no raising)."""
    cov = state.cov
    omega = symplectic_form(state.n_modes)
    symmetry_defect = float(np.max(np.abs(cov - cov.T)))
    min_eig = float(np.min(np.linalg.eigvalsh(cov + 1j * omega)))
    nu = symplectic_eigenvalues(cov)
    return StateDiagnostics(
        symmetry_defect=symmetry_defect,
        min_physicality_eig=min_eig,
        symplectic_eigenvalues=nu,
        is_physical=min_eig >= PHYSICALITY_EIG_FLOOR,
        is_pure=bool(np.all(np.abs(nu - 1.0) <= PURITY_TOL)),
    )
