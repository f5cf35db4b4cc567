"""Cuspidality analysis of 3-R serial robots.

Kinematics and inverse kinematics, singularity curves and cusp points,
joint-space topology (aspects, characteristic surfaces, uniqueness
domains, regions of feasible paths), workspace-path feasibility and
non-singular posture-change planning, plus geometric classification of
robot designs.
"""

from .classify import (ClassificationResult, atlas_scan,
                       bifurcation_value, check_simplifying_conditions,
                       classify_robot, count_cusps_numeric,
                       is_cuspidal_closed_form)
from .config import DEFAULT_TOLS, Tolerances
from .errors import (AnalysisAnomaly, CuspidalError, DegenerateElimination,
                     NonOrthogonalGeometry, PostureChangeImpossible,
                     RobotFileError)
from .ik import (IkSolution, IkSolutionSet, IkTarget, QuarticPoly,
                 ik_coefficients, inverse_kinematics, solve_quartic)
from .model import (CartesianPoint, JointConfig, RobotParams,
                    det_jacobian, det_jacobian_orthogonal,
                    forward_kinematics, jacobian, rho_z, wrap_angle)
from .path import (LiftResult, PostureChangePlan, WorkspacePath,
                   check_feasibility, lift_path, plan_posture_change)
from .singular import (CuspPoint, SingularityCurve, WorkspaceBoundary,
                       detect_cusps, scan_cusps, trace_singularity_curves,
                       workspace_boundary)
from .topo import (AspectMap, CharSurfaceSet, RegionPartition,
                   characteristic_surfaces, compute_aspects,
                   feasible_regions, label_solutions, partition_regions,
                   uniqueness_domains)

__version__ = "0.1.0"
