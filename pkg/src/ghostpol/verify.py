"""Self-check suites wiring the independent computation pathways against each
other: the closed forms against brute-force traces, the geometric invariants,
and the count-statistics identities.  Used by ``ghostpol verify`` and by the
test suite; every suite is deterministic for a given seed and passes for any
seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bank import make_bank_coplanar, make_probe, total_coincidence_constant
from .discrimination import build_library, estimate_pattern, pattern
from .jones import AXIS_D, AXIS_H, svd2
from .objects import preset_set
from .quantum import (
    chsh_canonical,
    coincidence_closed_form,
    coincidence_expectation,
    ellipsoid_residual,
    joint_oracle,
    poincare_closed_form,
    reduced_reference,
    source_state,
    wootters_concurrence,
)

SWEEP_PHIS = tuple(k * math.pi / 3 for k in range(6))


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str


def _random_matrix(rng: np.random.Generator) -> np.ndarray:
    """2x2 matrix with entries uniform on the complex unit disk."""
    r = np.sqrt(rng.uniform(0.0, 1.0, (2, 2)))
    phase = rng.uniform(0.0, 2.0 * math.pi, (2, 2))
    m = r * np.exp(1j * phase)
    # Avoid numerically empty matrices; the physics there is a separate error path.
    while np.sum(np.abs(m) ** 2) < 1e-3:
        r = np.sqrt(rng.uniform(0.0, 1.0, (2, 2)))
        phase = rng.uniform(0.0, 2.0 * math.pi, (2, 2))
        m = r * np.exp(1j * phase)
    return m


def _random_density(rng: np.random.Generator) -> np.ndarray:
    a = _random_matrix(rng)
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def suite_ellipsoid(seed: int = 0, samples: int = 10_000) -> SuiteResult:
    """Reduced states stay on the ellipsoid fixed by the singular values."""
    rng = np.random.default_rng(seed)
    t = np.stack([_random_matrix(rng) for _ in range(samples)])
    worst = max(
        float(np.max(np.abs(ellipsoid_residual(t, q))))
        for q in (0.0, float(rng.uniform(0.0, 1.0)), 1.0)
    )
    return SuiteResult("ellipsoid-invariant", worst < 1e-10, f"max |residual| = {worst:.3e}")


def suite_pathway(seed: int = 1, samples: int = 10_000) -> SuiteResult:
    """Reduced-state coincidence equals the full bipartite joint computation."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        t = _random_matrix(rng)
        m = _random_matrix(rng)
        q = float(rng.uniform(0.0, 1.0))
        rho_r, _ = reduced_reference(t, q)
        gamma = coincidence_expectation(rho_r, m)
        worst = max(worst, abs(joint_oracle(t, m, q).gamma - gamma))
    return SuiteResult("pathway-equivalence", worst < 1e-12, f"max |diff| = {worst:.3e}")


def suite_closed_form(seed: int = 2, samples: int = 10_000) -> SuiteResult:
    """Singular-value coincidence formula equals the trace formula."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        rho = _random_density(rng)
        m = _random_matrix(rng)
        p = np.array(
            [
                (rho[0, 0] - rho[1, 1]).real,
                2.0 * rho[0, 1].real,
                2.0 * rho[0, 1].imag,
            ]
        )
        direct = coincidence_expectation(rho, m)
        closed = coincidence_closed_form(p, svd2(m))
        worst = max(worst, abs(direct - closed))
    return SuiteResult("closed-form-rate", worst < 1e-12, f"max |diff| = {worst:.3e}")


def suite_entanglement_collapse() -> SuiteResult:
    """Phase objects behind a diagonal polarizer collapse at q = 0 and
    separate linearly in q."""
    oset = preset_set("retarder-sweep", SWEEP_PHIS)
    probe = make_probe(AXIS_D, 1.0, 0.0)
    bank = make_bank_coplanar(AXIS_H, 0.0, 1.0, 0.3, 3)

    def gammas(q: float) -> np.ndarray:
        return np.stack(
            [pattern(spec, 0.0, probe, bank, q).gammas for spec in oset.objects]
        )

    g0, g1 = gammas(0.0), gammas(1.0)
    d0 = np.sqrt(np.sum((g0[:, None, :] - g0[None, :, :]) ** 2, axis=-1))
    d1 = np.sqrt(np.sum((g1[:, None, :] - g1[None, :, :]) ** 2, axis=-1))
    off = ~np.eye(len(oset.objects), dtype=bool)
    collapse = float(d0[off].max())
    spread = float(d1[off].min())

    # Transverse Poincare components must scale exactly with q.
    worst_ratio = 0.0
    for spec in oset.objects:
        t = probe @ np.array(
            [[spec.t_h, 0], [0, spec.t_v * np.exp(1j * spec.phi)]], dtype=complex
        )
        p1 = poincare_closed_form(t, 1.0)
        for q in (0.25, 0.5):
            pq = poincare_closed_form(t, q)
            worst_ratio = max(worst_ratio, float(np.max(np.abs(pq[1:] - q * p1[1:]))))

    ok = collapse < 1e-12 and spread > 0.0 and worst_ratio < 1e-12
    return SuiteResult(
        "entanglement-collapse",
        ok,
        f"q=0 spread = {collapse:.3e}, q=1 min distance = {spread:.3e}, "
        f"linearity defect = {worst_ratio:.3e}",
    )


def suite_bell() -> SuiteResult:
    """Canonical Bell parameter and source concurrence match their targets."""
    worst_s = max(
        abs(chsh_canonical(q) - math.sqrt(2.0) * (1.0 + q)) for q in (0.0, 0.5, 1.0)
    )
    worst_c = max(
        abs(wootters_concurrence(source_state(q)) - q)
        for q in (0.0, 0.25, 0.37, 0.5, 1.0)
    )
    ok = worst_s < 1e-12 and worst_c < 1e-12
    return SuiteResult(
        "bell-concurrence", ok, f"S defect = {worst_s:.3e}, concurrence defect = {worst_c:.3e}"
    )


def suite_constant_sum(seed: int = 3) -> SuiteResult:
    """Constrained banks pin the summed rate; count estimates invert exactly."""
    oset = preset_set("paper-abc")
    rng = np.random.default_rng(seed)
    polar, azim = rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi)
    normal = np.array(
        [math.cos(polar), math.sin(polar) * math.cos(azim), math.sin(polar) * math.sin(azim)]
    )
    bank = make_bank_coplanar(normal, float(rng.uniform(0, 2 * math.pi)), 1.0, 0.3, 3)
    probe = make_probe(AXIS_D, 1.0, 0.45)
    lib = build_library(oset, 180, probe, bank, 1.0)
    sums = lib.gammas.sum(axis=1)
    variance = float(np.var(sums))
    constant = total_coincidence_constant(bank)
    offset = float(np.max(np.abs(sums - constant)))

    worst_rec = 0.0
    for i in (0, 97, 311):
        counts = lib.gammas[i] * 2.0**20
        est = estimate_pattern(counts, bank)
        worst_rec = max(worst_rec, float(np.max(np.abs(est.gammas - lib.gammas[i]))))

    ok = variance < 1e-24 and offset < 1e-12 and worst_rec < 1e-12
    return SuiteResult(
        "constant-sum",
        ok,
        f"sum variance = {variance:.3e}, offset = {offset:.3e}, "
        f"estimate defect = {worst_rec:.3e}",
    )


def run_all(seed: int = 0) -> list[SuiteResult]:
    return [
        suite_ellipsoid(seed),
        suite_pathway(seed + 1),
        suite_closed_form(seed + 2),
        suite_entanglement_collapse(),
        suite_bell(),
        suite_constant_sum(seed + 3),
    ]
