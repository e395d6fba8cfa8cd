#!/usr/bin/env python3
"""Why the probe arm needs a polarization transformation at all.

Three objects are compared: a transparent waveplate, a lossy waveplate, and a
linear polarizer.  For each object orientation the reference photon is
steered into a reduced state, drawn here as a curve on the Poincare ball:

* no probe element      -> the waveplate collapses to the origin: its
                           orientation is invisible;
* full polarizer        -> every state is pinned to the sphere surface and
                           the curves cross;
* partial polarizer     -> curves fall on distinct shells and separate.

Writes loops.csv and a 3-panel figure under demos/output/reduced_state_loops/.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import ghostpol as gp

OUT = pathlib.Path(__file__).parent / "output" / "reduced_state_loops"
OUT.mkdir(parents=True, exist_ok=True)

demo_set = gp.preset_set("paper-abc")
thetas = np.linspace(0, np.pi, 180, endpoint=False)

probes = {
    "none": np.eye(2, dtype=complex),
    "full polarizer": gp.make_probe(gp.AXIS_C, 1.0, 0.0),
    "partial polarizer": gp.make_probe(gp.AXIS_C, 1.0, 0.343),
}

rows = ["probe,object,theta_rad,p_H,p_D,p_C"]
loops = {}
for probe_name, probe in probes.items():
    for spec in demo_set.objects:
        points = []
        for theta in thetas:
            t = probe @ gp.build_jones(spec, theta)
            rho, _ = gp.reduced_reference(t, 1.0)
            p = gp.poincare_of_density(rho)
            points.append(p)
            rows.append(
                f"{probe_name},{spec.name},{theta:.17g},{p[0]:.17g},{p[1]:.17g},{p[2]:.17g}"
            )
        loops[(probe_name, spec.name)] = np.array(points)

(OUT / "loops.csv").write_text("\n".join(rows) + "\n")

fig, axes = plt.subplots(1, 3, figsize=(13, 4.2), subplot_kw={"projection": "3d"})
colors = {"a": "tab:blue", "b": "tab:orange", "c": "tab:green"}
for ax, probe_name in zip(axes, probes):
    for spec in demo_set.objects:
        pts = loops[(probe_name, spec.name)]
        ax.plot(pts[:, 1], pts[:, 2], pts[:, 0], color=colors[spec.name], label=spec.name)
        ax.scatter(*pts[0][[1, 2, 0]], color=colors[spec.name], s=12)
    u, v = np.meshgrid(np.linspace(0, 2 * np.pi, 30), np.linspace(0, np.pi, 15))
    ax.plot_wireframe(
        np.cos(u) * np.sin(v), np.sin(u) * np.sin(v), np.cos(v),
        color="gray", alpha=0.12, linewidth=0.5,
    )
    ax.set_title(f"probe: {probe_name}")
    ax.set_xlabel("D")
    ax.set_ylabel("C")
    ax.set_zlabel("H")
    ax.set_box_aspect((1, 1, 1))
axes[0].legend(title="object", loc="upper left")
fig.tight_layout()
fig.savefig(OUT / "loops.png", dpi=150)

print(f"wrote {OUT / 'loops.csv'}")
print(f"wrote {OUT / 'loops.png'}")
for probe_name in probes:
    radii = {
        spec.name: np.linalg.norm(loops[(probe_name, spec.name)], axis=1)
        for spec in demo_set.objects
    }
    summary = ", ".join(
        f"{name}: r in [{r.min():.3f}, {r.max():.3f}]" for name, r in radii.items()
    )
    print(f"{probe_name:>18}: {summary}")
