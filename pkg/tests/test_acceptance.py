"""Acceptance criteria, one test per criterion, each printing a PASS line
with its measured figure.  Criteria 5 and 9 share one optimized design
(module-scoped fixture, seed pinned); all tolerances are asserted as stated.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.
"""

import math
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest

import ghostpol as gp
from ghostpol.jones import AXIS_C, AXIS_D, AXIS_H, svd2
from ghostpol.objects import build_jones

DEMO = gp.preset_set("paper-abc")
SWEEP_PHIS = tuple(k * math.pi / 3 for k in range(6))
GRID = 180
SPACING = math.pi / GRID
ANGLE_TOL = 2 * SPACING  # 2 degrees


def random_jones(rng):
    r = np.sqrt(rng.uniform(0, 1, (2, 2)))
    return r * np.exp(1j * rng.uniform(0, 2 * np.pi, (2, 2)))


@pytest.fixture(scope="module")
def optimized():
    """Joint design for the demo set at q = 1 with three outputs."""
    cfg = gp.OptimizerConfig(seed=7)
    started = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = gp.optimize_joint(DEMO, 1.0, 3, cfg)
    elapsed = time.perf_counter() - started
    lib = gp.build_library(DEMO, GRID, result.probe.jones(), result.bank, 1.0)
    return result, lib, elapsed


def test_criterion_1_ellipsoid_invariant():
    rng = np.random.default_rng(101)
    ts = np.stack([random_jones(rng) for _ in range(10_000)])
    started = time.perf_counter()
    worst = max(
        float(np.max(np.abs(gp.ellipsoid_residual(ts, q))))
        for q in (0.0, float(rng.uniform(0, 1)), 1.0)
    )
    elapsed = time.perf_counter() - started
    assert worst < 1e-10
    assert elapsed < 1.0
    print(f"ACCEPTANCE 1 PASS: ellipsoid residual max {worst:.3e} in {elapsed:.2f}s")


def test_criterion_2_pathway_equivalence():
    rng = np.random.default_rng(102)
    cases = [(random_jones(rng), random_jones(rng), float(rng.uniform(0, 1)))
             for _ in range(10_000)]
    started = time.perf_counter()
    worst = 0.0
    for t, m, q in cases:
        rho, _ = gp.reduced_reference(t, q)
        gamma = gp.coincidence_expectation(rho, m)
        worst = max(worst, abs(gp.joint_oracle(t, m, q).gamma - gamma))
    elapsed = time.perf_counter() - started
    assert worst < 1e-12
    assert elapsed < 2.0
    print(f"ACCEPTANCE 2 PASS: pathway difference max {worst:.3e} in {elapsed:.2f}s")


def test_criterion_3_closed_form_rate():
    rng = np.random.default_rng(103)
    cases = []
    for _ in range(10_000):
        a = random_jones(rng)
        rho = a @ a.conj().T
        cases.append((rho / np.trace(rho).real, random_jones(rng)))
    started = time.perf_counter()
    worst = 0.0
    for rho, m in cases:
        closed = gp.coincidence_closed_form(gp.poincare_of_density(rho), svd2(m))
        worst = max(worst, abs(closed - gp.coincidence_expectation(rho, m)))
    elapsed = time.perf_counter() - started
    assert worst < 1e-12
    assert elapsed < 1.0
    print(f"ACCEPTANCE 3 PASS: closed-form difference max {worst:.3e} in {elapsed:.2f}s")


def test_criterion_4_probe_necessity_geometry():
    thetas = SPACING * np.arange(GRID)
    # No probe element: the transparent waveplate pins its partner at the
    # origin for every orientation, so the angle is unidentifiable.
    worst_origin = 0.0
    for theta in thetas:
        rho, _ = gp.reduced_reference(build_jones(DEMO.objects[0], theta), 1.0)
        worst_origin = max(worst_origin, float(np.linalg.norm(gp.poincare_of_density(rho))))
    assert worst_origin < 1e-12

    # Fully polarizing probe: every reduced state sits on the sphere surface.
    # The polarizer axis is circular so the composite with the rotated
    # linear-polarizer object never vanishes on the grid.
    polarizer = gp.make_probe(AXIS_C, 1.0, 0.0)
    worst_surface = 0.0
    for spec in DEMO.objects:
        for theta in thetas:
            t = polarizer @ build_jones(spec, theta)
            rho, _ = gp.reduced_reference(t, 1.0)
            radius = float(np.linalg.norm(gp.poincare_of_density(rho)))
            worst_surface = max(worst_surface, abs(radius - 1.0))
    assert worst_surface < 1e-12
    print(
        "ACCEPTANCE 4 PASS: identity-probe origin defect "
        f"{worst_origin:.3e}, polarizer-probe surface defect {worst_surface:.3e}"
    )


def test_criterion_5_optimized_design_identifies(optimized):
    result, lib, optimize_seconds = optimized
    started = time.perf_counter()
    assert result.margin > 0.0

    for i in range(len(lib)):
        res = gp.identify(lib.entry_pattern(i), lib)
        assert res.object_index == lib.object_index[i]
        assert res.theta_hat == lib.thetas[i]
        assert res.distance == 0.0

    rng = np.random.default_rng(105)
    probe_jones = result.probe.jones()
    worst_err = 0.0
    for _ in range(540):
        obj = int(rng.integers(len(DEMO.objects)))
        theta = float(rng.uniform(0, math.pi))
        observed = gp.pattern(DEMO.objects[obj], theta, probe_jones, result.bank, 1.0)
        res = gp.identify(observed, lib)
        assert res.object_index == obj
        err = abs(res.theta_hat - theta) % math.pi
        worst_err = max(worst_err, min(err, math.pi - err))
    assert worst_err <= SPACING + 1e-12
    total = optimize_seconds + time.perf_counter() - started
    assert total < 120.0
    print(
        f"ACCEPTANCE 5 PASS: margin {result.margin:.4f}, 540/540 exact, "
        f"off-grid worst error {worst_err / SPACING:.3f} spacings, {total:.0f}s total"
    )


def test_criterion_6_entanglement_necessity():
    sweep = gp.preset_set("retarder-sweep", SWEEP_PHIS)
    probe = gp.make_probe(AXIS_D, 1.0, 0.0)
    bank = gp.make_bank_coplanar(AXIS_H, 0.0, 1.0, 0.3, 3)

    def gammas(q):
        return np.stack(
            [gp.pattern(s, 0.0, probe, bank, q).gammas for s in sweep.objects]
        )

    off = ~np.eye(len(sweep.objects), dtype=bool)

    g0 = gammas(0.0)
    d0 = np.sqrt(np.sum((g0[:, None, :] - g0[None, :, :]) ** 2, axis=-1))
    collapse = float(d0[off].max())
    assert collapse < 1e-12

    g1 = gammas(1.0)
    d1 = np.sqrt(np.sum((g1[:, None, :] - g1[None, :, :]) ** 2, axis=-1))
    spread = float(d1[off].min())
    assert spread > 0.0

    worst_linearity = 0.0
    for spec in sweep.objects:
        t = probe @ build_jones(spec, 0.0)
        p1 = gp.poincare_closed_form(t, 1.0)
        for q in (0.25, 0.5):
            pq = gp.poincare_closed_form(t, q)
            worst_linearity = max(
                worst_linearity, float(np.max(np.abs(pq[1:] - q * p1[1:])))
            )
    assert worst_linearity < 1e-12
    print(
        f"ACCEPTANCE 6 PASS: q=0 collapse {collapse:.3e}, q=1 spread {spread:.3f}, "
        f"linearity defect {worst_linearity:.3e}"
    )


def test_criterion_7_bell_and_concurrence():
    worst_s = max(
        abs(gp.chsh_canonical(q) - math.sqrt(2) * (1 + q)) for q in (0.0, 0.5, 1.0)
    )
    assert worst_s < 1e-12
    worst_c = max(
        abs(gp.wootters_concurrence(gp.source_state(q)) - q)
        for q in (0.0, 0.25, 0.37, 0.5, 1.0)
    )
    assert worst_c < 1e-12
    print(f"ACCEPTANCE 7 PASS: S defect {worst_s:.3e}, concurrence defect {worst_c:.3e}")


def test_criterion_8_constant_sum(optimized):
    _, lib, _ = optimized
    sums = lib.gammas.sum(axis=1)
    variance = float(np.var(sums))
    assert variance < 1e-24
    constant = gp.total_coincidence_constant(lib.bank)
    assert float(np.max(np.abs(sums - constant))) < 1e-12

    worst = 0.0
    for i in (0, 123, 456):
        estimate = gp.estimate_pattern(lib.gammas[i] * 2.0**20, lib.bank)
        worst = max(worst, float(np.max(np.abs(estimate.gammas - lib.gammas[i]))))
    assert worst < 1e-12
    print(f"ACCEPTANCE 8 PASS: sum variance {variance:.3e}, estimate defect {worst:.3e}")


def test_criterion_9_noise_benchmark(optimized):
    _, lib, _ = optimized
    budgets = [100, 1_000, 10_000, 1_000_000]
    trials = 1_000
    started = time.perf_counter()
    rows = gp.noise_sweep(lib, budgets, trials=trials, seed=109)
    elapsed = time.perf_counter() - started
    accuracies = [r.accuracy for r in rows]
    assert accuracies[-1] >= 0.99
    for a, b in zip(accuracies, accuracies[1:]):
        sigma = math.sqrt(
            a * (1 - a) / trials + b * (1 - b) / trials
        )
        assert b >= a - 2 * sigma
    assert elapsed < 60.0
    print(
        "ACCEPTANCE 9 PASS: accuracies "
        + ", ".join(f"{b}:{a:.3f}" for b, a in zip(budgets, accuracies))
        + f" in {elapsed:.1f}s"
    )


def test_criterion_10_verify_command_exits_clean():
    proc = subprocess.run(
        [sys.executable, "-m", "ghostpol", "verify"],
        capture_output=True,
        text=True,
        timeout=300,
    )
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert proc.stdout.count("PASS") == 6
    assert "FAIL" not in proc.stdout
    print("ACCEPTANCE 10 PASS: verify command exited 0 with 6 passing suites")
