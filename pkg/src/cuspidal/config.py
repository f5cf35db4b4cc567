"""Centralized numerical tolerances and grid defaults.

Every report emitted by the CLI echoes the active tolerance set so results
can be reproduced exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # geometry / parameter checks
    orthogonal_eps: float = 1e-12      # |alpha| - pi/2 bound for orthogonal()
    rule_eps: float = 1e-12            # exact-structure checks of design rules

    # polynomial root solving
    root_cluster_tol: float = 1e-7     # t-space clustering of equal roots
    root_polish_rel: float = 1e-10     # |P(t)| acceptance after polishing
    real_root_imag_tol: float = 1e-6   # |Im| bound (relative) for a real root

    # inverse kinematics
    ik_residual_rel: float = 1e-8      # FK round-trip residual per solution
    unit_circle_tol: float = 1e-8      # |c2^2+s2^2-1| bound after polishing
    merge_tol_joint: float = 1e-5      # near-coincident solution separation

    # singularity tracing / cusps
    curve_refine_rel: float = 1e-10    # |det J| on refined curve samples
    velocity_accept_frac: float = 1e-3 # refined image speed vs median speed
    velocity_scan_frac: float = 0.5    # raw-sample dip that triggers subsampling
    node_reject_rel: float = 1e-4      # |grad det J| bound marking curve nodes
    cusp_newton_rel: float = 1e-9      # triple-root system residual
    cusp_shift_rel: float = 1e-4       # allowed (R, z) drift during confirmation
    cusp_dedupe_tol: float = 1e-6      # torus distance merging duplicate cusps
    triple_cluster_tol: float = 2e-4   # root-cluster width counting multiplicity

    # classification
    closed_form_band: float = 1e-9     # indeterminate band around equality
    atlas_min_cells: int = 2           # absorb smaller atlas components

    # topology
    image_tol: float = 1e-6            # distance of CS images to the boundary
    detj_interior_rel: float = 1e-6    # |det J| bound for "non-singular" points

    # path lifting / planning
    lift_newton_rel: float = 1e-10
    lift_max_newton: int = 8
    lift_min_step_frac: float = 1e-6
    lift_singular_rel: float = 1e-8
    planner_clearance_frac: float = 0.01

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **kw) -> "Tolerances":
        return dataclasses.replace(self, **kw)


DEFAULT_TOLS = Tolerances()

# grid defaults
TRACE_GRID = 512          # singularity tracing
TOPO_GRID = 512           # aspects / regions
WORKSPACE_GRID = 384      # (rho, z) rasters
ATLAS_TRACE_GRID = 256    # per-cell tracing inside atlas scans
