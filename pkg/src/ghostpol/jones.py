"""2x2 Jones calculus: composition, rotation, singular decomposition, Poincare map.

Conventions used throughout the package:

* Jones matrices are plain ``(2, 2)`` complex numpy arrays in the {H, V}
  basis; pure polarization states are ``(2,)`` complex arrays.
* Rotations are counterclockwise, ``R(theta) = [[cos, -sin], [sin, cos]]``,
  and elements rotate by similarity, ``R(theta) @ J @ R(-theta)``.
* A Poincare vector is the real triple ``(p_H, p_D, p_C)`` of Pauli
  expectation values ``(tr(rho Z), tr(rho X), -tr(rho Y))``.  The C axis
  points to right circular polarization ``(|H> - i|V>)/sqrt(2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

KET_H = np.array([1, 0], dtype=complex)
KET_V = np.array([0, 1], dtype=complex)
KET_D = np.array([1, 1], dtype=complex) / np.sqrt(2)
KET_A = np.array([1, -1], dtype=complex) / np.sqrt(2)
KET_R = np.array([1, -1j], dtype=complex) / np.sqrt(2)
KET_L = np.array([1, 1j], dtype=complex) / np.sqrt(2)

# Poincare axes, same component order as poincare_of_pure output.
AXIS_H = np.array([1.0, 0.0, 0.0])
AXIS_D = np.array([0.0, 1.0, 0.0])
AXIS_C = np.array([0.0, 0.0, 1.0])


def as_jones(j) -> np.ndarray:
    """Coerce to a complex array of 2x2 matrices and reject non-finite entries."""
    j = np.asarray(j, dtype=complex)
    if j.shape[-2:] != (2, 2):
        raise ValueError(f"expected 2x2 matrices, got shape {j.shape}")
    if not np.all(np.isfinite(j)):
        raise ValueError("Jones matrix entries must be finite")
    return j


def projector(state) -> np.ndarray:
    """Rank-one Jones matrix |state><state|."""
    s = np.asarray(state, dtype=complex)
    return np.outer(s, s.conj())


def compose(a, b) -> np.ndarray:
    """Chain two elements, b acting first: returns a @ b."""
    return as_jones(a) @ as_jones(b)


def rotation(theta: float) -> np.ndarray:
    """Counterclockwise rotation matrix R(theta) in the {H, V} basis."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rotate(j, theta: float) -> np.ndarray:
    """Rotate an element by theta: R(theta) @ j @ R(-theta).

    A similarity transform by a real rotation, so singular values are
    preserved and theta = pi reproduces j exactly (R(pi) = -I).
    """
    if not np.isfinite(theta):
        raise ValueError("rotation angle must be finite")
    r = rotation(theta)
    return r @ as_jones(j) @ r.conj().T


@dataclass(frozen=True)
class SingularDecomposition:
    """SVD of a 2x2 matrix: j = sigma1 |l1><r1| + sigma2 |l2><r2|.

    Deterministic conventions: sigma1 >= sigma2 >= 0; each right singular
    vector is rephased so its H component is real and non-negative (the V
    component when the H one vanishes); when the singular values coincide
    any right basis is valid and {|H>, |V>} is returned.
    """

    sigma1: float
    sigma2: float
    left1: np.ndarray
    left2: np.ndarray
    right1: np.ndarray
    right2: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.sigma1 * np.outer(self.left1, self.right1.conj()) + (
            self.sigma2 * np.outer(self.left2, self.right2.conj())
        )


def _fix_phase(vec: np.ndarray) -> complex:
    """Phase factor that makes the leading component real non-negative."""
    pivot = vec[0] if abs(vec[0]) > 1e-12 else vec[1]
    if abs(pivot) == 0.0:
        return 1.0
    return pivot / abs(pivot)


def svd2(j) -> SingularDecomposition:
    """Singular value decomposition of a single 2x2 Jones matrix."""
    j = as_jones(j)
    if j.shape != (2, 2):
        raise ValueError("svd2 takes a single 2x2 matrix")
    u, s, vh = np.linalg.svd(j)
    sigma1, sigma2 = float(s[0]), float(s[1])

    if sigma1 - sigma2 <= 1e-12 * max(sigma1, 1.0):
        # Degenerate: pin the right basis to {H, V}; the left vectors follow
        # from the matrix itself so the reconstruction stays exact.
        right1, right2 = KET_H.copy(), KET_V.copy()
        if sigma1 > 0.0:
            left1 = j @ right1 / sigma1
            left2 = j @ right2 / (sigma2 if sigma2 > 0.0 else sigma1)
        else:
            left1, left2 = KET_H.copy(), KET_V.copy()
        return SingularDecomposition(sigma1, sigma2, left1, left2, right1, right2)

    rights = []
    lefts = []
    for i in range(2):
        v = vh[i].conj()
        phase = _fix_phase(v)
        rights.append(v / phase)
        lefts.append(u[:, i] / phase)
    return SingularDecomposition(sigma1, sigma2, lefts[0], lefts[1], rights[0], rights[1])


def poincare_of_pure(state) -> np.ndarray:
    """Poincare vector (p_H, p_D, p_C) of a normalized pure state."""
    s = np.asarray(state, dtype=complex)
    cross = s[0] * np.conj(s[1])
    return np.array(
        [abs(s[0]) ** 2 - abs(s[1]) ** 2, 2.0 * cross.real, 2.0 * cross.imag]
    )


def pure_from_poincare(p) -> np.ndarray:
    """Pure state whose Poincare vector is the given unit vector.

    Inverse of :func:`poincare_of_pure` up to global phase; the returned
    state has a real non-negative H component.
    """
    p = np.asarray(p, dtype=float)
    norm = np.linalg.norm(p)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"expected a unit Poincare vector, |p| = {norm:.6g}")
    p = p / norm
    polar = np.arccos(np.clip(p[0], -1.0, 1.0))
    azim = np.arctan2(-p[2], p[1])
    return np.array([np.cos(polar / 2), np.sin(polar / 2) * np.exp(1j * azim)])


def eta(j) -> float:
    """Diattenuation strength (sigma1^2 - sigma2^2) / (sigma1^2 + sigma2^2).

    Zero for unitary elements, one for rank-one polarizers.
    """
    d = svd2(j)
    den = d.sigma1**2 + d.sigma2**2
    if den <= 0.0:
        raise ValueError("degenerate transformation: zero matrix has no eta")
    return (d.sigma1**2 - d.sigma2**2) / den
