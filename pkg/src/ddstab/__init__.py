"""Data-driven stabilization from noisy input/state trajectories.

Builds the sets of system matrices consistent with measured data under
instantaneous or energy disturbance bounds, synthesizes stabilizing
state-feedback gains by semidefinite programming, and measures the
uncertainty of the consistency sets through a matrix-ellipsoid size.
"""

from ddstab.ellipsoid import (
    CenterFormEllipsoid,
    DegenerateEllipsoid,
    MatrixShape,
    QuadraticFormEllipsoid,
    center_to_quadratic,
    membership,
    monte_carlo_volume_ratio,
    quadratic_to_center,
    sample_member,
    size,
)
from ddstab.datagen import (
    DataSet,
    DisturbanceModel,
    InputModel,
    LtiSystem,
    example1_dataset,
    example1_system,
    sample_uniform_ball,
    scalar_study_dataset,
    simulate,
    third_order_dataset,
    third_order_system,
)
from ddstab.consistency import ConsistencySets, build, is_bounded, member_C, member_I
from ddstab.sdp import ConicProblem, DecisionVector, LmiBlock, SolveReport
from ddstab.synthesis import SynthesisResult, UnboundedSet, design, validate_gain
from ddstab.overapprox import (
    InfeasibleContainment,
    OverapproxResult,
    compute_overapprox,
    containment_check,
    size_ratio,
)

__version__ = "0.1.0"
