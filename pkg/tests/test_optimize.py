import json
import math
import warnings

import numpy as np
import pytest

from ghostpol.bank import make_bank_coplanar, make_probe
from ghostpol.discrimination import build_library, separation_margin
from ghostpol.jones import AXIS_C, AXIS_D, AXIS_H
from ghostpol.objects import ObjectSet, ObjectSpec, preset_set
from ghostpol.optimize import (
    OptimizerConfig,
    decode_bank,
    decode_design,
    decode_probe,
    design_objective,
    design_result_to_json,
    nelder_mead,
    optimize_joint,
    optimize_probe,
    optimize_reference,
    parse_design_document,
    poincare_separation,
)

DEMO = preset_set("paper-abc")
SWEEP = preset_set("retarder-sweep", [k * math.pi / 3 for k in range(6)])

SMALL = OptimizerConfig(multistarts=2, max_iterations=200, seed=11)
TINY = OptimizerConfig(
    multistarts=1, max_iterations=120, seed=11, grid_points=45, final_grid_points=60
)


def quiet(fn, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fn(*args, **kwargs)


class TestNelderMead:
    def test_quadratic_bowl(self):
        x, f = nelder_mead(lambda v: float(np.sum(v**2)), np.array([3.0, -2.0]), SMALL)
        assert np.max(np.abs(x)) < 1e-6
        assert f < 1e-10

    def test_rosenbrock(self):
        def rosen(v):
            return float(100 * (v[1] - v[0] ** 2) ** 2 + (1 - v[0]) ** 2)

        cfg = OptimizerConfig(multistarts=1, max_iterations=2000, seed=0)
        x, f = nelder_mead(rosen, np.array([-1.2, 1.0]), cfg)
        assert np.max(np.abs(x - 1.0)) < 1e-3

    def test_constant_function_returns_start(self):
        x0 = np.array([0.4, -1.1, 2.0])
        x, f = nelder_mead(lambda v: 7.0, x0, SMALL)
        assert np.array_equal(x, x0)
        assert f == 7.0

    def test_never_worse_than_start(self):
        rng = np.random.default_rng(1)

        def noisy(v):
            return float(np.sum(np.abs(v)) + math.sin(40 * v[0]))

        for _ in range(5):
            x0 = rng.uniform(-2, 2, 2)
            _, f = nelder_mead(noisy, x0, SMALL)
            assert f <= noisy(x0)

    def test_non_finite_start_rejected(self):
        with pytest.raises(ValueError, match="not finite"):
            nelder_mead(lambda v: float("nan"), np.zeros(2), SMALL)


class TestDecode:
    def test_probe_round_trip(self):
        probe = decode_probe([0.7, 1.9, 0.3])
        assert probe.sigma1 == 1.0
        assert np.linalg.norm(probe.m1) == pytest.approx(1.0, abs=1e-12)
        assert 0.0 < probe.sigma2 < 1.0

    def test_sigma_logistic_monotone(self):
        values = [decode_probe([0.5, 0.5, x]).sigma2 for x in (-5, -1, 0, 1, 5)]
        assert values == sorted(values)
        assert decode_probe([0, 0, 0]).sigma2 == pytest.approx(0.5)

    def test_bank_decode(self):
        bank = decode_bank([0.3, 1.0, 0.5, -1.0], 3)
        assert bank.count == 3
        assert np.max(np.abs(bank.right_vectors.sum(axis=0))) < 1e-12

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            decode_design([0.0] * 5, 3)


class TestDesignObjective:
    def test_near_identity_probe_not_rewarded(self):
        # sigma2 pushed against 1: margin collapses and the band penalty
        # dominates, so the objective cannot go negative.
        params = np.array([0.5, 0.5, 30.0, 0.3, 1.0, 0.0, -1.0])
        assert design_objective(params, DEMO, 1.0, SMALL) >= 0.0

    def test_full_polarizer_probe_pins_sphere_surface(self):
        # sigma2 against 0: every reduced state sits on the sphere surface
        # and the curves cross, so the margin term vanishes.
        params = np.array([0.5, 0.5, -30.0, 0.3, 1.0, 0.0, -1.0])
        value = design_objective(params, DEMO, 1.0, SMALL)
        penalty_only = design_objective(params, DEMO, 1.0, SMALL) - 0.0
        assert value >= 0.0
        assert value == pytest.approx(penalty_only, abs=1e-12)

    def test_good_design_goes_negative(self):
        # Hand-tuned partial polarizer on the circular axis with the matching
        # plane separates the demo set (polar pi/2, azimuth pi/2 is the C axis).
        params = np.array(
            [math.pi / 2, math.pi / 2, math.log(0.35 / 0.65),
             math.pi / 2, math.pi / 2, 0.0, math.log(0.1 / 0.9)]
        )
        cfg = OptimizerConfig(seed=0, grid_points=180)
        assert design_objective(params, DEMO, 1.0, cfg) < -0.01


class TestOptimizeProbe:
    def test_sweep_probe_is_equatorial_polarizer(self):
        # For unrotated retarders every equatorial axis is exactly optimal
        # (the in-plane azimuth is degenerate), so assert the invariant
        # content: no H component, strong polarizer character, and a margin
        # matching the canonical diagonal polarizer.
        probe = quiet(optimize_probe, SWEEP, 1.0, SMALL)
        assert abs(probe.m1[0]) < 1e-6
        assert 0.0 < probe.sigma2 < 0.1
        tol = 2 * math.pi / 180
        got = poincare_separation(SWEEP, probe.jones(), 1.0, 180, tol)
        diagonal = make_probe(AXIS_D, 1.0, probe.sigma2)
        reference = poincare_separation(SWEEP, diagonal, 1.0, 180, tol)
        assert got == pytest.approx(reference, rel=1e-6)

    def test_demo_set_margin_positive(self):
        probe = quiet(optimize_probe, DEMO, 1.0, SMALL)
        assert 0.0 < probe.sigma2 / probe.sigma1 < 1.0
        margin = poincare_separation(DEMO, probe.jones(), 1.0, 180, 2 * math.pi / 180)
        assert margin > 0.01

    def test_identical_objects_warn(self):
        twin = ObjectSet(
            objects=(
                ObjectSpec("r0", phi=0.5, t_h=1.0, t_v=1.0),
                ObjectSpec("r1", phi=0.5, t_h=1.0, t_v=1.0),
            ),
            vary_theta=False,
        )
        with pytest.warns(UserWarning, match="non-discriminable"):
            optimize_probe(twin, 1.0, TINY)


class TestOptimizeReference:
    @pytest.fixture(scope="class")
    def good_probe(self):
        from ghostpol.bank import ProbeTransform

        return ProbeTransform(m1=AXIS_C, sigma1=1.0, sigma2=0.343)

    def test_three_outputs_separate(self, good_probe):
        bank = quiet(optimize_reference, DEMO, good_probe, 1.0, 3, SMALL)
        lib = build_library(DEMO, 180, good_probe.jones(), bank, 1.0)
        assert separation_margin(lib, 2 * lib.grid_spacing) > 0.01

    def test_two_outputs_never_beat_three(self, good_probe):
        bank2 = quiet(optimize_reference, DEMO, good_probe, 1.0, 2, SMALL)
        bank3 = quiet(optimize_reference, DEMO, good_probe, 1.0, 3, SMALL)
        lib2 = build_library(DEMO, 180, good_probe.jones(), bank2, 1.0)
        lib3 = build_library(DEMO, 180, good_probe.jones(), bank3, 1.0)
        m2 = separation_margin(lib2, 2 * lib2.grid_spacing)
        m3 = separation_margin(lib3, 2 * lib3.grid_spacing)
        assert m2 <= m3 + 1e-9

    def test_single_object_margin_is_angular_only(self, good_probe):
        solo = ObjectSet(objects=(ObjectSpec("b", phi=math.pi / 2, t_h=1.0, t_v=0.5),))
        bank = quiet(optimize_reference, solo, good_probe, 1.0, 3, TINY)
        lib = build_library(solo, 60, good_probe.jones(), bank, 1.0)
        assert separation_margin(lib, 2 * lib.grid_spacing) > 0.0


class TestOptimizeJoint:
    @pytest.fixture(scope="class")
    def result(self):
        return quiet(optimize_joint, DEMO, 1.0, 3, TINY)

    def test_margin_positive_and_consistent(self, result):
        lib = build_library(
            DEMO, TINY.final_grid_points, result.probe.jones(), result.bank, 1.0
        )
        recomputed = separation_margin(lib, 2 * lib.grid_spacing)
        assert result.margin > 0.0
        assert result.margin == pytest.approx(recomputed, abs=1e-10)

    def test_deterministic(self, result):
        again = quiet(optimize_joint, DEMO, 1.0, 3, TINY)
        assert np.array_equal(again.probe.m1, result.probe.m1)
        assert again.probe.sigma2 == result.probe.sigma2
        assert again.margin == result.margin
        assert again.objective_trace == result.objective_trace

    def test_trace_records_strict_improvements(self, result):
        values = [v for _, v in result.objective_trace]
        evals = [n for n, _ in result.objective_trace]
        assert len(values) >= 1
        assert all(b < a for a, b in zip(values, values[1:]))
        assert all(m < n for m, n in zip(evals, evals[1:]))

    def test_sweep_without_entanglement_cannot_separate(self):
        res = None
        with pytest.warns(UserWarning, match="non-discriminable"):
            res = optimize_joint(SWEEP, 0.0, 3, TINY)
        assert res.margin == pytest.approx(0.0, abs=1e-12)

    def test_more_starts_never_worse(self):
        cfg1 = OptimizerConfig(
            multistarts=1, max_iterations=100, seed=5, grid_points=45, final_grid_points=60
        )
        cfg2 = OptimizerConfig(
            multistarts=3, max_iterations=100, seed=5, grid_points=45, final_grid_points=60
        )
        r1 = quiet(optimize_joint, DEMO, 1.0, 3, cfg1)
        r2 = quiet(optimize_joint, DEMO, 1.0, 3, cfg2)
        assert r2.objective_trace[-1][1] <= r1.objective_trace[-1][1] + 1e-12


class TestMarginScalesWithEntanglement:
    def test_sweep_margin_linear_in_q(self):
        probe = make_probe(AXIS_D, 1.0, 0.0)
        bank = make_bank_coplanar(AXIS_H, 0.0, 1.0, 0.3, 3)

        def margin(q):
            lib = build_library(SWEEP, 60, probe, bank, q)
            return separation_margin(lib, 0.0)

        m1 = margin(1.0)
        assert m1 > 0
        assert margin(0.0) == pytest.approx(0.0, abs=1e-12)
        for q in (0.25, 0.5):
            assert margin(q) == pytest.approx(q * m1, abs=1e-12)


class TestDesignDocuments:
    def test_result_round_trip(self):
        res = quiet(optimize_joint, DEMO, 1.0, 3, TINY)
        text = design_result_to_json(res)
        probe, bank = parse_design_document(text)
        assert np.max(np.abs(probe.m1 - res.probe.m1)) < 1e-15
        assert probe.sigma2 == res.probe.sigma2
        assert bank.count == res.bank.count
        assert np.max(np.abs(np.array(bank.outputs) - np.array(res.bank.outputs))) < 1e-15
        doc = json.loads(text)
        assert doc["margin"] == res.margin
        assert doc["config"]["seed"] == TINY.seed

    def test_bare_document_accepted(self):
        text = json.dumps(
            {
                "probe": {"m1": [0, 0, 1], "sigma1": 1.0, "sigma2": 0.4},
                "bank": {
                    "mode": "constrained-coplanar",
                    "normal": [1, 0, 0],
                    "azimuth0_rad": 0.0,
                    "sigma1": 1.0,
                    "sigma2": 0.3,
                    "count": 3,
                },
            }
        )
        probe, bank = parse_design_document(text)
        assert probe.sigma2 == 0.4
        assert bank.count == 3

    def test_missing_records_rejected(self):
        with pytest.raises(ValueError, match="probe"):
            parse_design_document(json.dumps({"bank": {}}))
