"""Two-photon polarization model: correlated source, remote state preparation,
coincidence expectations, and entanglement diagnostics.

The photon pair lives in the 4-dimensional basis {HH, HV, VH, VV} with the
probe slot first.  The source density matrix is parameterized by a single
concurrence value q in [0, 1]: populations 1/2 on HH and VV, coherence q/2
between them.  q = 0 is the strongest classically correlated mixture, q = 1
the maximally entangled pure state.

Detecting the probe photon behind a total transformation T (object followed
by probe metasurface) steers the reference photon into a reduced state
rho_R.  Coincidence rates with a reference-arm output M are then
Gamma = tr(M rho_R M^dag), for which there is also a closed form in terms of
the singular values of M and the Poincare vector of rho_R.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .jones import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    SingularDecomposition,
    as_jones,
    poincare_of_pure,
    projector,
)

_EYE2 = np.eye(2, dtype=complex)


class ConditionalCoincidence(NamedTuple):
    """Joint probe+reference detection split into rate and conditioning."""

    gamma: float       # coincidence expectation conditioned on a probe click
    joint: float       # unconditioned joint detection probability
    probe_prob: float  # probe-arm detection probability


def source_state(q: float) -> np.ndarray:
    """4x4 density matrix of the photon-pair source with concurrence q."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"concurrence q must be in [0, 1], got {q}")
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = rho[3, 3] = 0.5
    rho[0, 3] = rho[3, 0] = q / 2.0
    return rho


def reduced_reference(t_p, q: float) -> tuple[np.ndarray, float]:
    """Reference-photon reduced state after a probe-arm transformation.

    Applies (t_p ⊗ 1) to the source state, traces out the probe slot, and
    normalizes.  Returns ``(rho_r, probe_prob)`` where probe_prob is the
    trace before normalization, i.e. the probe detection probability.
    """
    t = as_jones(t_p)
    if t.shape != (2, 2):
        raise ValueError("reduced_reference takes a single 2x2 matrix")
    op = np.kron(t, _EYE2)
    big = op @ source_state(q) @ op.conj().T
    unnorm = np.einsum("prps->rs", big.reshape(2, 2, 2, 2))
    probe_prob = float(np.trace(unnorm).real)
    if probe_prob < 1e-15:
        raise ValueError("zero probe detection probability")
    return unnorm / probe_prob, probe_prob


def poincare_of_density(rho) -> np.ndarray:
    """Poincare vector (tr(rho Z), tr(rho X), -tr(rho Y)) of a 2x2 state."""
    rho = np.asarray(rho, dtype=complex)
    return np.array(
        [
            np.trace(rho @ PAULI_Z).real,
            np.trace(rho @ PAULI_X).real,
            -np.trace(rho @ PAULI_Y).real,
        ]
    )


def _transfer_terms(t_p) -> tuple[np.ndarray, ...]:
    """Frobenius norm squared and column-overlap terms of stacked matrices."""
    t = as_jones(t_p)
    norm2 = np.sum(np.abs(t) ** 2, axis=(-2, -1))
    if np.any(norm2 < 1e-15):
        raise ValueError("zero transformation: probe arm transmits nothing")
    thh, thv = t[..., 0, 0], t[..., 0, 1]
    tvh, tvv = t[..., 1, 0], t[..., 1, 1]
    p_h = (np.abs(thh) ** 2 + np.abs(tvh) ** 2 - np.abs(tvv) ** 2 - np.abs(thv) ** 2) / norm2
    cross = thh * np.conj(thv) + tvh * np.conj(tvv)
    return norm2, p_h, 2.0 * cross.real / norm2, 2.0 * cross.imag / norm2


def poincare_closed_form(t_p, q: float) -> np.ndarray:
    """Reduced-state Poincare vector directly from the probe-arm matrix.

    The transverse (D, C) components carry the factor q: lowering the
    entanglement shrinks them while p_H is unaffected.  Accepts stacked
    matrices of shape (..., 2, 2) and returns shape (..., 3).
    """
    _, p_h, d_d, d_c = _transfer_terms(t_p)
    return np.stack([p_h, q * d_d, q * d_c], axis=-1)


def ellipsoid_residual(t_p, q: float) -> np.ndarray:
    """Defect of the ellipsoid relation tying the reduced state to eta(T).

    Returns p_H^2 + (p_D/q)^2 + (p_C/q)^2 - eta^2 with the transverse terms
    evaluated in q-factored form, so the value is well defined (and the
    relation non-degenerate) at q = 0.  Analytically zero for every
    transformation; numerically tiny.  Accepts stacked matrices.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"concurrence q must be in [0, 1], got {q}")
    _, p_h, d_d, d_c = _transfer_terms(t_p)
    s = np.linalg.svd(as_jones(t_p), compute_uv=False)
    s1sq, s2sq = s[..., 0] ** 2, s[..., 1] ** 2
    eta2 = ((s1sq - s2sq) / (s1sq + s2sq)) ** 2
    return p_h**2 + d_d**2 + d_c**2 - eta2


def coincidence_expectation(rho_r, m) -> float:
    """Coincidence expectation tr(M rho_R M^dag) for one reference output."""
    rho = np.asarray(rho_r, dtype=complex)
    mm = as_jones(m)
    return float(np.trace(mm @ rho @ mm.conj().T).real)


def coincidence_closed_form(p, m_svd: SingularDecomposition) -> float:
    """Coincidence expectation from singular values and Poincare geometry.

    Gamma = (s1^2 + s2^2)/2 + (p . m1) (s1^2 - s2^2)/2 where m1 is the
    dominant right singular direction of the output on the Poincare sphere.
    """
    m1 = poincare_of_pure(m_svd.right1)
    s1sq, s2sq = m_svd.sigma1**2, m_svd.sigma2**2
    return 0.5 * (s1sq + s2sq) + 0.5 * float(np.dot(np.asarray(p, float), m1)) * (s1sq - s2sq)


def joint_oracle(t_p, m, q: float) -> ConditionalCoincidence:
    """Joint detection computed on the full 4x4 state, no reduced-state shortcut.

    joint = tr[(T ⊗ M) rho_in (T ⊗ M)^dag]; gamma = joint / probe_prob.
    Serves as the brute-force cross-check for the reduced-state pathway.
    """
    t = as_jones(t_p)
    mm = as_jones(m)
    op = np.kron(t, mm)
    joint = float(np.trace(op @ source_state(q) @ op.conj().T).real)
    probe_op = np.kron(t, _EYE2)
    probe_prob = float(np.trace(probe_op @ source_state(q) @ probe_op.conj().T).real)
    if probe_prob < 1e-15:
        raise ValueError("zero probe detection probability")
    return ConditionalCoincidence(joint / probe_prob, joint, probe_prob)


def _linear_dichotomic(angle: float) -> np.ndarray:
    """Two-outcome linear-analyzer observable at the given axis angle."""
    ket = np.array([np.cos(angle), np.sin(angle)], dtype=complex)
    ket_perp = np.array([-np.sin(angle), np.cos(angle)], dtype=complex)
    return projector(ket) - projector(ket_perp)


# Canonical analyzer settings (probe 0 and 45 deg, reference +-22.5 deg).
_CHSH_SETTINGS = (0.0, np.pi / 4, np.pi / 8, -np.pi / 8)


def chsh_canonical(q: float) -> float:
    """Bell parameter S at fixed canonical linear-analyzer settings.

    For this source the value is sqrt(2) (1 + q): it reaches the Tsirelson
    bound 2 sqrt(2) at q = 1 and drops to sqrt(2) for the classically
    correlated mixture.  Computed from analyzer expectation values, not from
    the formula.
    """
    rho = source_state(q)
    a, a2, b, b2 = _CHSH_SETTINGS

    def corr(alpha: float, beta: float) -> float:
        obs = np.kron(_linear_dichotomic(alpha), _linear_dichotomic(beta))
        return float(np.trace(rho @ obs).real)

    return corr(a, b) + corr(a, b2) + corr(a2, b) - corr(a2, b2)


def wootters_concurrence(rho4) -> float:
    """Concurrence of a two-qubit density matrix via the spin-flip spectrum."""
    rho = np.asarray(rho4, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError("expected a 4x4 two-qubit density matrix")
    yy = np.kron(PAULI_Y, PAULI_Y)
    r = rho @ yy @ rho.conj() @ yy
    lam = np.sqrt(np.clip(np.sort(np.linalg.eigvals(r).real)[::-1], 0.0, None))
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))
