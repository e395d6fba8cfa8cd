"""Simulation and design toolkit for non-local discrimination of polarization
objects through coincidence measurements on correlated photon pairs.

The package follows the light path: :mod:`ghostpol.jones` provides the 2x2
polarization calculus, :mod:`ghostpol.quantum` the photon-pair source and
remote state preparation, :mod:`ghostpol.objects` the object library,
:mod:`ghostpol.bank` the metasurface transformations, and
:mod:`ghostpol.discrimination` turns designs into coincidence patterns,
identification, and noise benchmarks.  :mod:`ghostpol.optimize` searches for
discriminating designs; the ``ghostpol`` command drives everything from JSON
configs.
"""

from .jones import (
    AXIS_C,
    AXIS_D,
    AXIS_H,
    KET_A,
    KET_D,
    KET_H,
    KET_L,
    KET_R,
    KET_V,
    SingularDecomposition,
    compose,
    eta,
    poincare_of_pure,
    projector,
    pure_from_poincare,
    rotate,
    rotation,
    svd2,
)
from .quantum import (
    ConditionalCoincidence,
    chsh_canonical,
    coincidence_closed_form,
    coincidence_expectation,
    ellipsoid_residual,
    joint_oracle,
    poincare_closed_form,
    poincare_of_density,
    reduced_reference,
    source_state,
    wootters_concurrence,
)
from .objects import (
    ObjectSet,
    ObjectSpec,
    build_jones,
    object_set_to_json,
    parse_object_set,
    preset_set,
    rotation_period,
)
from .bank import (
    ProbeTransform,
    ReferenceBank,
    make_bank_coplanar,
    make_bank_free,
    make_probe,
    passivity_scale,
    total_coincidence_constant,
)
from .discrimination import (
    CoincidencePattern,
    IdentificationResult,
    PatternLibrary,
    build_library,
    build_library_closed_form,
    estimate_pattern,
    identify,
    noise_sweep,
    pattern,
    sample_counts,
    separation_margin,
)
from .optimize import (
    DesignResult,
    OptimizerConfig,
    design_objective,
    design_result_to_json,
    nelder_mead,
    optimize_joint,
    optimize_probe,
    optimize_reference,
    parse_design_document,
    poincare_separation,
)

__version__ = "0.1.0"
