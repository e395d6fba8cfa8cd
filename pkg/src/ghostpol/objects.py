"""Polarization object library: parametric specs, presets, rotation symmetry,
and JSON ingestion of object sets.

An object is either a retarder-diattenuator, diagonal in its own eigenbasis,

    Omega = t_h |H><H| + t_v exp(i phi) |V><V|,

rotated as a whole by an orientation angle theta, or an explicit passive
Jones matrix.  Object sets bundle the objects to be discriminated together
with the angular range over which orientations should be identified.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .jones import as_jones, rotate

KIND_RETARDER = "retarder-diattenuator"
KIND_EXPLICIT = "jones-explicit"

_PRESET_NAMES = ("paper-abc", "retarder-sweep")

# Any angle that is an irrational multiple of pi; a matrix invariant under
# this single rotation commutes with the whole rotation group.
_GENERIC_ANGLE = 0.6180339887498949


@dataclass(frozen=True, eq=False)
class ObjectSpec:
    """One polarization object, defined at orientation theta = 0."""

    name: str
    kind: str = KIND_RETARDER
    phi: float = 0.0
    t_h: float = 1.0
    t_v: float = 1.0
    jones: np.ndarray | None = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("object name must be non-empty")
        if self.kind == KIND_RETARDER:
            if not math.isfinite(self.phi):
                raise ValueError(f"object {self.name!r}: phi must be finite")
            for label, t in (("t_h", self.t_h), ("t_v", self.t_v)):
                if not 0.0 <= t <= 1.0:
                    raise ValueError(
                        f"object {self.name!r}: {label} = {t} outside [0, 1]"
                    )
        elif self.kind == KIND_EXPLICIT:
            if self.jones is None:
                raise ValueError(f"object {self.name!r}: explicit kind needs a jones matrix")
            j = as_jones(self.jones)
            top = float(np.linalg.svd(j, compute_uv=False)[0])
            if top > 1.0 + 1e-12:
                raise ValueError(
                    f"object {self.name!r}: jones matrix is not passive "
                    f"(largest singular value {top:.6g} > 1)"
                )
            object.__setattr__(self, "jones", j)
        else:
            raise ValueError(f"object {self.name!r}: unknown kind {self.kind!r}")

    def __eq__(self, other):
        if not isinstance(other, ObjectSpec):
            return NotImplemented
        if (self.name, self.kind, self.phi, self.t_h, self.t_v) != (
            other.name,
            other.kind,
            other.phi,
            other.t_h,
            other.t_v,
        ):
            return False
        if (self.jones is None) != (other.jones is None):
            return False
        return self.jones is None or np.array_equal(self.jones, other.jones)


@dataclass(frozen=True)
class ObjectSet:
    """Ordered collection of objects to discriminate.

    theta_period is the angular range [0, period) over which orientations are
    identified.  vary_theta = False marks sets meant to be told apart at a
    fixed orientation only (angle identification is not attempted), which is
    how the retarder-sweep preset is used.
    """

    objects: tuple[ObjectSpec, ...]
    theta_period: float = math.pi
    vary_theta: bool = True

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if len(self.objects) < 1:
            raise ValueError("object set must contain at least one object")
        names = [o.name for o in self.objects]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ValueError(f"duplicate object names: {', '.join(dupes)}")
        if not 0.0 < self.theta_period <= math.pi + 1e-12:
            raise ValueError(f"theta_period must be in (0, pi], got {self.theta_period}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(o.name for o in self.objects)


def build_jones(spec: ObjectSpec, theta: float = 0.0) -> np.ndarray:
    """Jones matrix of an object rotated to orientation theta."""
    if spec.kind == KIND_EXPLICIT:
        base = spec.jones
    else:
        base = np.array(
            [[spec.t_h, 0.0], [0.0, spec.t_v * np.exp(1j * spec.phi)]], dtype=complex
        )
    if theta == 0.0:
        return np.array(base, dtype=complex)
    return rotate(base, theta)


def preset_set(name: str, phis=None) -> ObjectSet:
    """Built-in object sets.

    ``paper-abc``
        Three-object demo set: a quarter-wave plate, a lossy quarter-wave
        plate with t_v = exp(-0.7), and a horizontal polarizer.  Orientation
        is identified over [0, pi).

    ``retarder-sweep``
        Lossless retarders at the given phase values phis, compared at a
        fixed orientation (no angle identification).
    """
    if name == "paper-abc":
        return ObjectSet(
            objects=(
                ObjectSpec("a", KIND_RETARDER, phi=math.pi / 2, t_h=1.0, t_v=1.0),
                ObjectSpec("b", KIND_RETARDER, phi=math.pi / 2, t_h=1.0, t_v=math.exp(-0.7)),
                ObjectSpec("c", KIND_RETARDER, phi=0.0, t_h=1.0, t_v=0.0),
            ),
            theta_period=math.pi,
            vary_theta=True,
        )
    if name == "retarder-sweep":
        if phis is None or len(tuple(phis)) == 0:
            raise ValueError("retarder-sweep preset needs a list of phase values")
        specs = tuple(
            ObjectSpec(f"phi{i}", KIND_RETARDER, phi=float(p), t_h=1.0, t_v=1.0)
            for i, p in enumerate(phis)
        )
        return ObjectSet(objects=specs, theta_period=math.pi, vary_theta=False)
    raise ValueError(
        f"unknown preset {name!r}; available presets: {', '.join(_PRESET_NAMES)}"
    )


def rotation_period(spec: ObjectSpec, max_divisor: int = 8) -> float:
    """Smallest rotation period of an object, in radians.

    Searches the divisors pi/k of the universal period pi (R(pi) = -I makes
    every Jones matrix pi-periodic) and returns the smallest angle that maps
    the object onto itself within 1e-10.  Isotropic objects, invariant under
    every rotation, return 0.0: their orientation is unidentifiable.
    """
    j = build_jones(spec, 0.0)
    if np.max(np.abs(rotate(j, _GENERIC_ANGLE) - j)) < 1e-10:
        return 0.0
    for k in range(max_divisor, 0, -1):
        period = math.pi / k
        if np.max(np.abs(rotate(j, period) - j)) < 1e-10:
            return period
    return math.pi


def _require(cond: bool, msg: str):
    if not cond:
        raise ValueError(msg)


def _parse_object(entry, index: int) -> ObjectSpec:
    where = f"objects[{index}]"
    _require(isinstance(entry, dict), f"{where}: expected an object record")
    name = entry.get("name")
    _require(isinstance(name, str) and name, f"{where}.name: non-empty string required")
    kind = entry.get("kind")
    if kind == KIND_RETARDER:
        for key in ("phi_rad", "t_h", "t_v"):
            _require(
                isinstance(entry.get(key), (int, float)),
                f"{where}.{key}: number required for kind {KIND_RETARDER!r}",
            )
        phi = float(entry["phi_rad"])
        t_h, t_v = float(entry["t_h"]), float(entry["t_v"])
        _require(math.isfinite(phi), f"{where}.phi_rad: must be finite")
        _require(0.0 <= t_h <= 1.0, f"{where}.t_h: {t_h} outside [0, 1]")
        _require(0.0 <= t_v <= 1.0, f"{where}.t_v: {t_v} outside [0, 1]")
        return ObjectSpec(name, KIND_RETARDER, phi=phi, t_h=t_h, t_v=t_v)
    if kind == KIND_EXPLICIT:
        pairs = entry.get("jones")
        _require(
            isinstance(pairs, list) and len(pairs) == 4,
            f"{where}.jones: four [re, im] pairs required (row-major HH, HV, VH, VV)",
        )
        values = []
        for k, pair in enumerate(pairs):
            _require(
                isinstance(pair, list)
                and len(pair) == 2
                and all(isinstance(x, (int, float)) for x in pair),
                f"{where}.jones[{k}]: expected an [re, im] pair",
            )
            values.append(complex(pair[0], pair[1]))
        j = np.array(values, dtype=complex).reshape(2, 2)
        return ObjectSpec(name, KIND_EXPLICIT, jones=j)
    raise ValueError(
        f"{where}.kind: expected {KIND_RETARDER!r} or {KIND_EXPLICIT!r}, got {kind!r}"
    )


def parse_object_set(text: str) -> ObjectSet:
    """Parse an object-set JSON document, with field-level error messages."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ValueError(f"invalid JSON: {err}") from err
    _require(isinstance(data, dict), "top level: expected a JSON object")
    period = data.get("theta_period_rad", math.pi)
    _require(
        isinstance(period, (int, float)) and 0.0 < period <= math.pi + 1e-12,
        f"theta_period_rad: must be in (0, pi], got {period!r}",
    )
    vary = data.get("vary_theta", True)
    _require(isinstance(vary, bool), "vary_theta: must be true or false")
    entries = data.get("objects")
    _require(isinstance(entries, list) and entries, "objects: non-empty list required")
    specs = [_parse_object(e, i) for i, e in enumerate(entries)]
    names = [s.name for s in specs]
    dupes = sorted({n for n in names if names.count(n) > 1})
    _require(not dupes, f"objects: duplicate names: {', '.join(dupes)}")
    return ObjectSet(objects=tuple(specs), theta_period=float(period), vary_theta=vary)


def object_set_to_json(oset: ObjectSet) -> str:
    """Serialize an object set; round-trips exactly through parse_object_set."""
    entries = []
    for spec in oset.objects:
        if spec.kind == KIND_RETARDER:
            entries.append(
                {
                    "name": spec.name,
                    "kind": spec.kind,
                    "phi_rad": spec.phi,
                    "t_h": spec.t_h,
                    "t_v": spec.t_v,
                }
            )
        else:
            flat = spec.jones.reshape(-1)
            entries.append(
                {
                    "name": spec.name,
                    "kind": spec.kind,
                    "jones": [[z.real, z.imag] for z in flat],
                }
            )
    doc = {
        "theta_period_rad": oset.theta_period,
        "vary_theta": oset.vary_theta,
        "objects": entries,
    }
    return json.dumps(doc, indent=2)
