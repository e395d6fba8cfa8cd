"""Derivative-free design search for the probe element and reference bank.

The search space is small: the probe contributes two sphere angles for its
dominant right singular direction plus a logit for its smaller singular value
(the larger one is pinned to 1 for photon economy); the bank contributes two
sphere angles for the plane normal, the in-plane starting azimuth, and a
logit for its smaller singular value.

The margin landscape has many poor local optima, so the joint search runs in
two stages: a deterministic coarse survey over probe parameters and candidate
plane normals ranks promising basins, then multistart Nelder-Mead (survey
candidates plus a seeded Halton start list) polishes them against the
fine-grid objective.  Everything is reproducible bit for bit for a fixed
seed.

The inner loop exploits an exact reduction: for a constrained bank the
pattern-space difference between two library entries is
(sigma1R^2 - sigma2R^2)/2 times the per-output projections of the
reduced-state difference, so margins are evaluated directly from Poincare
geometry without rebuilding libraries.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize as sp_optimize
from scipy.stats import qmc

from .bank import (
    ProbeTransform,
    ReferenceBank,
    bank_from_dict,
    bank_to_dict,
    make_bank_coplanar,
    make_probe,
    plane_frame,
    probe_from_dict,
    probe_to_dict,
)
from .discrimination import (
    build_library,
    build_library_closed_form,
    separation_mask,
    separation_margin,
)
from .objects import ObjectSet, build_jones, rotation_period
from .quantum import poincare_closed_form

# Margin substituted when nothing needs separating (single isotropic object),
# keeping the objective finite for the simplex.
_VACUOUS_MARGIN = 1e3

_SIMPLEX_STEP = 0.25

# Deterministic survey resolution: probe parameter grid and plane normals.
_SURVEY_POLARS = 8
_SURVEY_AZIMS = 16
_SURVEY_SIGMAS = (0.2, 0.35, 0.5, 0.65)
_SURVEY_NORMALS = 64
_SURVEY_TOP = 3


@dataclass(frozen=True)
class OptimizerConfig:
    multistarts: int = 6
    max_iterations: int = 600
    f_tol: float = 1e-10          # simplex function-value tolerance
    x_tol: float = 1e-9           # simplex parameter tolerance
    seed: int = 0
    passivity_weight: float = 10.0
    edge_weight: float = 10.0
    edge_margin: float = 0.02     # singular-value band (eps, 1 - eps)
    grid_points: int = 60         # orientation grid for the coarse survey
    final_grid_points: int = 180  # grid for polish and the reported margin
    angle_tol: float | None = None  # default: 2 spacings of the final grid

    def __post_init__(self):
        if self.multistarts < 1:
            raise ValueError("multistarts must be >= 1")
        if self.f_tol <= 0 or self.x_tol <= 0:
            raise ValueError("simplex tolerances must be positive")


@dataclass(frozen=True)
class DesignResult:
    probe: ProbeTransform
    bank: ReferenceBank
    margin: float
    objective_trace: tuple[tuple[int, float], ...]
    config: OptimizerConfig


def nelder_mead(f, x0, cfg: OptimizerConfig) -> tuple[np.ndarray, float]:
    """Simplex minimization of f from x0; never returns worse than the start.

    Terminates on the iteration cap or when both simplex tolerances are met.
    Raises if f is not finite at the start point.
    """
    x0 = np.asarray(x0, dtype=float)
    f0 = float(f(x0))
    if not math.isfinite(f0):
        raise ValueError(f"objective is not finite at the start point: {f0}")
    simplex = np.vstack([x0, x0 + _SIMPLEX_STEP * np.eye(len(x0))])
    res = sp_optimize.minimize(
        f,
        x0,
        method="Nelder-Mead",
        options={
            "maxiter": cfg.max_iterations,
            "fatol": cfg.f_tol,
            "xatol": cfg.x_tol,
            "initial_simplex": simplex,
        },
    )
    if res.fun < f0:
        return np.asarray(res.x, dtype=float), float(res.fun)
    return x0, f0


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def _logit(s: float) -> float:
    return math.log(s / (1.0 - s))


def _decode_sigma2(logit: float) -> float:
    # Clamped so the decoded element never becomes an exact projector or an
    # exact unitary; the edge penalty does the real steering.
    return min(max(_logistic(logit), 1e-8), 1.0 - 1e-8)


def _unit_from_angles(polar: float, azimuth: float) -> np.ndarray:
    s = math.sin(polar)
    return np.array([math.cos(polar), s * math.cos(azimuth), s * math.sin(azimuth)])


def _angles_from_unit(v: np.ndarray) -> tuple[float, float]:
    return math.acos(max(-1.0, min(1.0, float(v[0])))), math.atan2(float(v[2]), float(v[1]))


def decode_probe(params) -> ProbeTransform:
    params = np.asarray(params, dtype=float)
    if params.shape != (3,):
        raise ValueError(f"probe decode expects 3 parameters, got {params.shape}")
    return ProbeTransform(
        m1=_unit_from_angles(params[0], params[1]),
        sigma1=1.0,
        sigma2=_decode_sigma2(params[2]),
    )


def decode_bank(params, outputs: int) -> ReferenceBank:
    params = np.asarray(params, dtype=float)
    if params.shape != (4,):
        raise ValueError(f"bank decode expects 4 parameters, got {params.shape}")
    return make_bank_coplanar(
        _unit_from_angles(params[0], params[1]),
        float(params[2]),
        1.0,
        _decode_sigma2(params[3]),
        outputs,
    )


def decode_design(params, outputs: int) -> tuple[ProbeTransform, ReferenceBank]:
    params = np.asarray(params, dtype=float)
    if params.shape != (7,):
        raise ValueError(f"joint decode expects 7 parameters, got {params.shape}")
    return decode_probe(params[:3]), decode_bank(params[3:], outputs)


def _edge_penalty(sigma2: float, cfg: OptimizerConfig) -> float:
    eps = cfg.edge_margin
    low = max(0.0, eps - sigma2)
    high = max(0.0, sigma2 - (1.0 - eps))
    return cfg.edge_weight * (low * low + high * high)


def _passivity_penalty(sigma1: float, cfg: OptimizerConfig) -> float:
    over = max(0.0, sigma1 - 1.0)
    return cfg.passivity_weight * over * over


def _capped(margin: float) -> float:
    return margin if math.isfinite(margin) else _VACUOUS_MARGIN


def design_objective(
    params, oset: ObjectSet, q: float, cfg: OptimizerConfig, outputs: int = 3
) -> float:
    """Negative pattern-space margin of a decoded joint design, plus penalties.

    Builds the pattern library on cfg.grid_points and evaluates its
    separation margin; the multistart machinery uses an algebraically
    identical fast path.
    """
    probe, bank = decode_design(params, outputs)
    lib = build_library_closed_form(oset, cfg.grid_points, probe.jones(), bank, q)
    tol = cfg.angle_tol if cfg.angle_tol is not None else 2.0 * lib.grid_spacing
    margin = separation_margin(lib, tol)
    penalty = (
        _edge_penalty(probe.sigma2, cfg)
        + _edge_penalty(bank.sigma2, cfg)
        + _passivity_penalty(probe.sigma1, cfg)
        + _passivity_penalty(bank.sigma1, cfg)
    )
    return -_capped(margin) + penalty


def _fibonacci_sphere(count: int) -> np.ndarray:
    k = np.arange(count)
    golden = math.pi * (3.0 - math.sqrt(5.0))
    z = 1.0 - 2.0 * (k + 0.5) / count
    r = np.sqrt(1.0 - z * z)
    return np.stack([z, r * np.cos(golden * k), r * np.sin(golden * k)], axis=1)


class _GridTables:
    """Precomputed per-grid quantities: rotated objects and required pairs."""

    def __init__(self, oset: ObjectSet, grid_points: int, angle_tol: float | None):
        if oset.vary_theta:
            thetas = oset.theta_period / grid_points * np.arange(grid_points)
            spacing = oset.theta_period / grid_points
        else:
            thetas = np.array([0.0])
            spacing = 0.0
        self.spacing = spacing
        self.angle_tol = angle_tol if angle_tol is not None else 2.0 * spacing
        k = len(thetas)
        c, s = np.cos(thetas), np.sin(thetas)
        rot = np.zeros((k, 2, 2), dtype=complex)
        rot[:, 0, 0] = c
        rot[:, 0, 1] = -s
        rot[:, 1, 0] = s
        rot[:, 1, 1] = c
        rot_inv = rot.transpose(0, 2, 1)
        blocks = []
        for spec in oset.objects:
            j0 = build_jones(spec, 0.0)
            blocks.append(np.einsum("kab,bc,kcd->kad", rot, j0, rot_inv))
        self.rotated = np.concatenate(blocks)
        self.object_index = np.repeat(np.arange(len(oset.objects)), k)
        self.thetas = np.tile(thetas, len(oset.objects))
        self.periods = np.array([rotation_period(spec) for spec in oset.objects])
        mask = separation_mask(
            self.object_index, self.thetas, self.periods, self.angle_tol, oset.vary_theta
        )
        self.pair_i, self.pair_j = np.nonzero(np.triu(mask, k=1))
        # Distances between non-required pairs are ignored via +inf.
        self.exclusion = np.where(mask, 0.0, math.inf)

    def poincare(self, probe_jones: np.ndarray, q: float) -> np.ndarray:
        return poincare_closed_form(probe_jones @ self.rotated, q)

    def pair_deltas(self, points: np.ndarray) -> np.ndarray:
        out = np.empty((len(self.pair_i), points.shape[1]))
        for k in range(points.shape[1]):
            col = np.ascontiguousarray(points[:, k])
            out[:, k] = col.take(self.pair_i) - col.take(self.pair_j)
        return out

    def point_margin(self, points: np.ndarray) -> float:
        """Smallest required-pair distance via the Gram identity.

        |x_i - x_j|^2 = |x_i|^2 + |x_j|^2 - 2 x_i . x_j, evaluated for the
        whole grid at once; the cancellation error is ~1e-16 absolute, well
        below the margins the search cares about.
        """
        if len(self.pair_i) == 0:
            return math.inf
        sq = np.einsum("ij,ij->i", points, points)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
        d2 += self.exclusion
        return float(math.sqrt(max(d2.min(), 0.0)))

    def point_margin_exact(self, points: np.ndarray) -> float:
        """Smallest required-pair distance from explicit differences.

        Slower than the Gram path but free of cancellation: collapsed
        configurations report exactly zero.
        """
        if len(self.pair_i) == 0:
            return math.inf
        d = self.pair_deltas(points)
        return float(math.sqrt(np.min(np.einsum("pi,pi->p", d, d))))


class _DesignEvaluator:
    """Shared tables and fast margin evaluations for one design problem."""

    def __init__(self, oset: ObjectSet, q: float, outputs: int, cfg: OptimizerConfig):
        self.oset = oset
        self.q = q
        self.outputs = outputs
        self.cfg = cfg
        self.fine = _GridTables(oset, cfg.final_grid_points, cfg.angle_tol)
        self.survey_grid = _GridTables(oset, cfg.grid_points, cfg.angle_tol)
        self.normals = _fibonacci_sphere(_SURVEY_NORMALS)

    def pattern_margin(self, probe_jones, bank: ReferenceBank, tables: _GridTables) -> float:
        """Worst-case pattern distance; equals the library-path margin.

        Per-output rate differences are half_diff_n * (m_n . delta p); the
        constant part of each rate cancels between entries.
        """
        m1, s1sq, s2sq = bank.output_geometry()
        proj = m1 * (0.5 * (s1sq - s2sq))[:, None]
        g = tables.poincare(probe_jones, self.q) @ proj.T
        return tables.point_margin(g)

    def objective(self, params) -> float:
        """Fast equivalent of design_objective on the fine grid.

        Decodes geometry directly (the bank's Jones outputs are never needed
        for margins) and evaluates rate differences through the projected
        Poincare points.
        """
        params = np.asarray(params, dtype=float)
        if params.shape != (7,):
            raise ValueError(f"joint decode expects 7 parameters, got {params.shape}")
        sigma2_p = _decode_sigma2(params[2])
        sigma2_r = _decode_sigma2(params[6])
        probe_jones = make_probe(_unit_from_angles(params[0], params[1]), 1.0, sigma2_p)
        normal = _unit_from_angles(params[3], params[4])
        e1, e2 = plane_frame(normal)
        angles = params[5] + 2.0 * math.pi * np.arange(self.outputs) / self.outputs
        m1 = np.outer(np.cos(angles), e1) + np.outer(np.sin(angles), e2)
        proj = m1 * (0.5 * (1.0 - sigma2_r**2))
        g = self.fine.poincare(probe_jones, self.q) @ proj.T
        margin = self.fine.point_margin(g)
        return (
            -_capped(margin)
            + _edge_penalty(sigma2_p, self.cfg)
            + _edge_penalty(sigma2_r, self.cfg)
        )

    def survey(self) -> list[np.ndarray]:
        """Rank a deterministic probe/normal grid; return warm-start vectors.

        For a coplanar bank the N outputs project onto the bank plane, so the
        best normal for a probe maximizes the smallest pair separation
        orthogonal to it.  The unprojected pair margin upper-bounds every
        plane margin, so probes that cannot beat the current leaders skip the
        normal scan entirely.
        """
        tables = self.survey_grid
        if len(tables.pair_i) == 0:
            return [np.zeros(7)]
        polars = np.linspace(0.15, math.pi - 0.15, _SURVEY_POLARS)
        azims = np.linspace(0.0, 2.0 * math.pi, _SURVEY_AZIMS, endpoint=False)
        scored: list[tuple[float, int, float, float, float, int]] = []
        order = 0
        for sigma2 in _SURVEY_SIGMAS:
            for polar in polars:
                for azim in azims:
                    order += 1
                    probe = make_probe(_unit_from_angles(polar, azim), 1.0, sigma2)
                    points = tables.poincare(probe, self.q)
                    bound = tables.point_margin(points) ** 2
                    if len(scored) >= _SURVEY_TOP and bound <= scored[-1][0]:
                        continue
                    dp = tables.pair_deltas(points)
                    dp2 = np.einsum("pi,pi->p", dp, dp)
                    plane2 = np.min(dp2[:, None] - (dp @ self.normals.T) ** 2, axis=0)
                    best = int(np.argmax(plane2))
                    scored.append(
                        (float(plane2[best]), order, polar, azim, sigma2, best)
                    )
                    scored.sort(key=lambda rec: (-rec[0], rec[1]))
                    del scored[_SURVEY_TOP:]
        starts = []
        for plane2, _, polar, azim, sigma2, best in scored:
            n_polar, n_azim = _angles_from_unit(self.normals[best])
            starts.append(
                np.array(
                    [polar, azim, _logit(sigma2), n_polar, n_azim, 0.0, _logit(0.1)]
                )
            )
        return starts


def poincare_separation(
    oset: ObjectSet, probe, q: float, grid_points: int, angle_tol: float
) -> float:
    """Worst-case reduced-state separation on the Poincare sphere.

    Bank-independent margin of the probe stage alone: if reduced-state curves
    cross here, no reference bank can tell the crossing pairs apart.
    """
    tables = _GridTables(oset, grid_points, angle_tol)
    return tables.point_margin(tables.poincare(np.asarray(probe, dtype=complex), q))


# Start-point boxes: (polar, azimuth) sphere angles, in-plane azimuth, logits.
_PROBE_BOX = ((0.0, math.pi), (0.0, 2 * math.pi), (-2.0, 2.0))
_BANK_BOX = ((0.0, math.pi), (0.0, 2 * math.pi), (0.0, 2 * math.pi), (-2.0, 2.0))
_JOINT_BOX = _PROBE_BOX + _BANK_BOX


def _start_points(cfg: OptimizerConfig, box) -> np.ndarray:
    lows = np.array([b[0] for b in box])
    highs = np.array([b[1] for b in box])
    sampler = qmc.Halton(d=len(box), scramble=True, seed=cfg.seed)
    return lows + sampler.random(cfg.multistarts) * (highs - lows)


def _traced(f, trace: list):
    state = {"evals": 0, "best": math.inf}

    def wrapped(x):
        value = float(f(x))
        state["evals"] += 1
        if value < state["best"]:
            state["best"] = value
            trace.append((state["evals"], value))
        return value

    return wrapped


def _multistart(objective, starts, cfg: OptimizerConfig):
    """Best (value, x, trace) over the start list; ties keep the earliest."""
    best = None
    failures = []
    for i, x0 in enumerate(starts):
        trace: list[tuple[int, float]] = []
        try:
            x, value = nelder_mead(_traced(objective, trace), x0, cfg)
        except ValueError as err:
            failures.append(f"start {i}: {err}")
            continue
        if best is None or value < best[0]:
            best = (value, x, trace)
    if best is None:
        raise RuntimeError(
            "all optimizer starts were infeasible:\n" + "\n".join(failures)
        )
    return best


def optimize_probe(oset: ObjectSet, q: float, cfg: OptimizerConfig) -> ProbeTransform:
    """Probe element maximizing worst-case reduced-state separation."""
    tables = _GridTables(oset, cfg.final_grid_points, cfg.angle_tol)

    def objective(x):
        probe = decode_probe(x)
        margin = tables.point_margin(tables.poincare(probe.jones(), q))
        return -_capped(margin) + _edge_penalty(probe.sigma2, cfg)

    # Deterministic coarse scan seeds the simplex runs.
    warm = None
    for sigma2 in _SURVEY_SIGMAS:
        for polar in np.linspace(0.15, math.pi - 0.15, _SURVEY_POLARS):
            for azim in np.linspace(0.0, 2.0 * math.pi, _SURVEY_AZIMS, endpoint=False):
                x = np.array([polar, azim, _logit(sigma2)])
                value = objective(x)
                if warm is None or value < warm[0]:
                    warm = (value, x)
    starts = [warm[1]] + list(_start_points(cfg, _PROBE_BOX))
    _, x, _ = _multistart(objective, starts, cfg)
    probe = decode_probe(x)
    margin = tables.point_margin_exact(tables.poincare(probe.jones(), q))
    if margin <= 0.0:
        warnings.warn("object set is non-discriminable: zero reduced-state margin")
    return probe


def optimize_reference(
    oset: ObjectSet, probe: ProbeTransform, q: float, outputs: int, cfg: OptimizerConfig
) -> ReferenceBank:
    """Reference bank maximizing the pattern-space margin for a fixed probe."""
    ev = _DesignEvaluator(oset, q, outputs, cfg)
    probe_jones = probe.jones()
    points = ev.fine.poincare(probe_jones, q)

    def objective(x):
        bank = decode_bank(x, outputs)
        margin = ev.pattern_margin(probe_jones, bank, ev.fine)
        return -_capped(margin) + _edge_penalty(bank.sigma2, cfg)

    if len(ev.fine.pair_i):
        normals = _fibonacci_sphere(4 * _SURVEY_NORMALS)
        dp = ev.fine.pair_deltas(points)
        dp2 = np.einsum("pi,pi->p", dp, dp)
        plane2 = np.min(dp2[:, None] - (dp @ normals.T) ** 2, axis=0)
        n_polar, n_azim = _angles_from_unit(normals[int(np.argmax(plane2))])
        warm = [np.array([n_polar, n_azim, 0.0, _logit(0.1)])]
    else:
        warm = []
    starts = warm + list(_start_points(cfg, _BANK_BOX))
    _, x, _ = _multistart(objective, starts, cfg)
    bank = decode_bank(x, outputs)
    m1, s1sq, s2sq = bank.output_geometry()
    g = points @ (m1 * (0.5 * (s1sq - s2sq))[:, None]).T
    if ev.fine.point_margin_exact(g) <= 0.0:
        warnings.warn("object set is non-discriminable: zero pattern margin")
    return bank


def optimize_joint(
    oset: ObjectSet, q: float, outputs: int, cfg: OptimizerConfig
) -> DesignResult:
    """Joint probe + bank search.

    Survey warm starts plus the seeded Halton list feed multistart
    Nelder-Mead; the reported margin is recomputed from scratch on the fine
    grid through the per-entry pattern pathway.
    """
    ev = _DesignEvaluator(oset, q, outputs, cfg)
    starts = ev.survey() + list(_start_points(cfg, _JOINT_BOX))
    _, x, trace = _multistart(ev.objective, starts, cfg)
    probe, bank = decode_design(x, outputs)
    fine = build_library(oset, cfg.final_grid_points, probe.jones(), bank, q)
    tol = cfg.angle_tol if cfg.angle_tol is not None else 2.0 * fine.grid_spacing
    margin = separation_margin(fine, tol)
    if not math.isfinite(margin):
        margin = _VACUOUS_MARGIN
    if margin <= 0.0:
        warnings.warn("object set is non-discriminable: zero pattern margin")
    return DesignResult(
        probe=probe,
        bank=bank,
        margin=float(margin),
        objective_trace=tuple(trace),
        config=cfg,
    )


def design_result_to_json(result: DesignResult) -> str:
    doc = {
        "probe": probe_to_dict(result.probe),
        "bank": bank_to_dict(result.bank),
        "margin": result.margin,
        "config": asdict(result.config),
        "objective_trace": [[n, v] for n, v in result.objective_trace],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def parse_design_document(text: str) -> tuple[ProbeTransform, ReferenceBank]:
    """Load the probe and bank from a design document.

    Accepts both a bare {probe, bank} document and the richer export of
    design_result_to_json; anything else raises with the missing field.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ValueError(f"invalid JSON: {err}") from err
    if not isinstance(data, dict) or "probe" not in data or "bank" not in data:
        raise ValueError("design document must contain 'probe' and 'bank' records")
    return probe_from_dict(data["probe"]), bank_from_dict(data["bank"])
