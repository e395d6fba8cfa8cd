"""Metasurface transformations at the Jones level: the probe-arm element and
the multi-output reference bank.

The probe element is parameterized by its dominant right singular direction
on the Poincare sphere plus its two singular values; the left unitary factor
never enters coincidence rates (only M^dag M does) and defaults to identity.

A constrained reference bank gives all outputs the same singular value pair
and places their dominant right singular directions evenly spaced on a great
circle of the Poincare sphere, so they sum to zero.  That makes the summed
coincidence rate a design constant, independent of the reduced state: counts
never vanish and relative counts suffice for identification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .jones import AXIS_C, AXIS_D, AXIS_H, as_jones, pure_from_poincare, svd2

MODE_CONSTRAINED = "constrained-coplanar"
MODE_FREE = "free"

_ALLOWED_COUNTS = (2, 3, 4)


def _unit(v, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"{what}: expected a 3-vector")
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"{what}: expected a unit vector, |v| = {norm:.6g}")
    return v / norm


def _check_sigmas(sigma1: float, sigma2: float):
    if not 0.0 <= sigma2 <= sigma1 <= 1.0 + 1e-12:
        raise ValueError(
            f"singular values must satisfy 0 <= sigma2 <= sigma1 <= 1, "
            f"got ({sigma1}, {sigma2})"
        )


def _su2(angles) -> np.ndarray:
    a, b, g = angles
    return np.array(
        [
            [np.cos(b) * np.exp(1j * a), -np.sin(b) * np.exp(1j * g)],
            [np.sin(b) * np.exp(-1j * g), np.cos(b) * np.exp(-1j * a)],
        ]
    )


def make_probe(m1, sigma1: float, sigma2: float, left_angles=None) -> np.ndarray:
    """Jones matrix with prescribed singular values and right singular basis.

    m1 is the unit Poincare vector of the dominant right singular state; the
    orthogonal partner sits at the antipode.  left_angles, when given, are
    three SU(2) angles for the left unitary factor (irrelevant to coincidence
    rates, identity by default).
    """
    m1 = _unit(m1, "m1")
    _check_sigmas(sigma1, sigma2)
    v1 = pure_from_poincare(m1)
    v2 = np.array([-np.conj(v1[1]), np.conj(v1[0])])
    v = np.column_stack([v1, v2])
    core = np.diag([sigma1, sigma2]).astype(complex) @ v.conj().T
    if left_angles is None:
        return core
    return _su2(left_angles) @ core


@dataclass(frozen=True)
class ProbeTransform:
    """Probe-arm metasurface parameterization."""

    m1: np.ndarray
    sigma1: float = 1.0
    sigma2: float = 0.3
    left_angles: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "m1", _unit(self.m1, "probe m1"))
        _check_sigmas(self.sigma1, self.sigma2)

    def jones(self) -> np.ndarray:
        return make_probe(self.m1, self.sigma1, self.sigma2, self.left_angles)


@dataclass(frozen=True)
class ReferenceBank:
    """Reference-arm metasurface with one Jones matrix per output.

    In constrained mode the per-output dominant right singular directions
    (right_vectors) are stored alongside the shared singular values and plane
    geometry; in free mode only the output matrices are meaningful.
    """

    outputs: tuple[np.ndarray, ...]
    mode: str = MODE_CONSTRAINED
    sigma1: float | None = None
    sigma2: float | None = None
    plane_normal: np.ndarray | None = None
    azimuth0: float | None = None
    right_vectors: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "outputs", tuple(as_jones(m) for m in self.outputs))
        if self.mode not in (MODE_CONSTRAINED, MODE_FREE):
            raise ValueError(f"unknown bank mode {self.mode!r}")

    @property
    def count(self) -> int:
        return len(self.outputs)

    def output_geometry(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-output (m1 directions, sigma1^2, sigma2^2) for coincidence math."""
        if self.right_vectors is not None:
            n = self.count
            s1sq = np.full(n, self.sigma1**2)
            s2sq = np.full(n, self.sigma2**2)
            return self.right_vectors, s1sq, s2sq
        from .jones import poincare_of_pure

        decomps = [svd2(m) for m in self.outputs]
        m1 = np.array([poincare_of_pure(d.right1) for d in decomps])
        s1sq = np.array([d.sigma1**2 for d in decomps])
        s2sq = np.array([d.sigma2**2 for d in decomps])
        return m1, s1sq, s2sq


def plane_frame(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal frame spanning the plane normal to n."""
    seeds = (AXIS_H, AXIS_D, AXIS_C)
    overlaps = [abs(float(np.dot(normal, s))) for s in seeds]
    seed = seeds[int(np.argmin(overlaps))]
    e1 = seed - np.dot(seed, normal) * normal
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    return e1, e2


def make_bank_coplanar(
    normal, azimuth0: float, sigma1: float, sigma2: float, count: int
) -> ReferenceBank:
    """Constrained reference bank with evenly spaced coplanar outputs.

    The count dominant right singular directions sit in the plane orthogonal
    to the given normal, separated by 2 pi / count starting at azimuth0, so
    their vector sum vanishes.  All outputs share (sigma1, sigma2).
    """
    if count not in _ALLOWED_COUNTS:
        raise ValueError(f"output count must be one of {_ALLOWED_COUNTS}, got {count}")
    normal = _unit(normal, "plane normal")
    _check_sigmas(sigma1, sigma2)
    e1, e2 = plane_frame(normal)
    angles = azimuth0 + 2.0 * math.pi * np.arange(count) / count
    vectors = np.outer(np.cos(angles), e1) + np.outer(np.sin(angles), e2)
    outputs = tuple(make_probe(v, sigma1, sigma2) for v in vectors)
    return ReferenceBank(
        outputs=outputs,
        mode=MODE_CONSTRAINED,
        sigma1=float(sigma1),
        sigma2=float(sigma2),
        plane_normal=normal,
        azimuth0=float(azimuth0),
        right_vectors=vectors,
    )


def make_bank_free(matrices) -> ReferenceBank:
    """Unconstrained bank from explicit output matrices (e.g. a tomography set)."""
    outputs = tuple(as_jones(m) for m in matrices)
    if not 2 <= len(outputs) <= 4:
        raise ValueError(f"output count must be one of {_ALLOWED_COUNTS}, got {len(outputs)}")
    return ReferenceBank(outputs=outputs, mode=MODE_FREE)


def passivity_scale(bank: ReferenceBank) -> float:
    """Uniform scale s making the bank a lossless-or-lossy splitter.

    Largest eigenvalue of sum_n (s M_n)^dag (s M_n) equals 1 after scaling.
    Scaling all outputs together multiplies every coincidence rate by s^2 and
    leaves identification unchanged.
    """
    total = np.zeros((2, 2), dtype=complex)
    for m in bank.outputs:
        total += m.conj().T @ m
    top = float(np.linalg.eigvalsh(total)[-1])
    if top < 1e-30:
        raise ValueError("all-zero bank has no passivity scale")
    return 1.0 / math.sqrt(top)


def total_coincidence_constant(bank: ReferenceBank) -> float:
    """Design constant sum_n Gamma_n = N (sigma1^2 + sigma2^2) / 2.

    Holds for every reduced state because the dominant right singular
    directions sum to zero; only defined in constrained mode.
    """
    if bank.mode != MODE_CONSTRAINED:
        raise ValueError("total coincidence rate is not constant in free mode")
    return bank.count * (bank.sigma1**2 + bank.sigma2**2) / 2.0


def probe_to_dict(probe: ProbeTransform) -> dict:
    return {
        "m1": [float(x) for x in probe.m1],
        "sigma1": float(probe.sigma1),
        "sigma2": float(probe.sigma2),
    }


def probe_from_dict(data: dict) -> ProbeTransform:
    try:
        return ProbeTransform(
            m1=np.asarray(data["m1"], dtype=float),
            sigma1=float(data["sigma1"]),
            sigma2=float(data["sigma2"]),
        )
    except KeyError as err:
        raise ValueError(f"probe document missing field {err}") from err


def bank_to_dict(bank: ReferenceBank) -> dict:
    if bank.mode != MODE_CONSTRAINED:
        raise ValueError("free-mode banks cannot be serialized")
    return {
        "mode": bank.mode,
        "normal": [float(x) for x in bank.plane_normal],
        "azimuth0_rad": float(bank.azimuth0),
        "sigma1": float(bank.sigma1),
        "sigma2": float(bank.sigma2),
        "count": bank.count,
    }


def bank_from_dict(data: dict) -> ReferenceBank:
    try:
        if data.get("mode", MODE_CONSTRAINED) != MODE_CONSTRAINED:
            raise ValueError(f"unsupported bank mode {data.get('mode')!r} in document")
        return make_bank_coplanar(
            np.asarray(data["normal"], dtype=float),
            float(data["azimuth0_rad"]),
            float(data["sigma1"]),
            float(data["sigma2"]),
            int(data["count"]),
        )
    except KeyError as err:
        raise ValueError(f"bank document missing field {err}") from err
