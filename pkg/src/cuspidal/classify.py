"""Cuspidality classification from geometry.

Three routes, in decreasing order of speed:

* seven sufficient geometric design rules (parallel / intersecting /
  orthogonal axis combinations) that guarantee a robot is non-cuspidal;
* a closed-form criterion for orthogonal robots with r3 = 0, expressed
  through the bifurcation curves C1..C4 of the (d3, d4) parameter plane;
* numeric cusp counting (trace the singularities, detect and confirm
  cusps), which for orthogonal robots is exact: such a robot is cuspidal
  if and only if it has at least one cusp point.

The closed-form criterion used here is: non-cuspidal  <=>  d4 < C1(d3, r2)
(workspace with a void, two solutions everywhere)  OR  d3 < d2 and
d4 > C2(d3, r2) (four separated postures).  Published statements of this
criterion and of design rule 7 circulate with the inequalities garbled;
this orientation is the one consistent with the standard worked example
(d2=1, d3=2, d4=1.5, r2=1 is cuspidal with four cusps) and is verified
against numeric cusp counts by the test suite over the whole plane.

Note the rule-7 inequality d4^2 > d3^2 (1 + (r2/(d2-d3))^2) describes the
same boundary curve as C2/C3; it is sufficient for non-cuspidality only on
the d3 < d2 branch, which is how it is evaluated here (for d3 > d2 the
region beyond the curve is the four-cusp domain 4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from .config import ATLAS_TRACE_GRID, DEFAULT_TOLS, TRACE_GRID, Tolerances
from .errors import NonOrthogonalGeometry
from .model import RobotParams
from .singular import scan_cusps, trace_singularity_curves

RULE_DESCRIPTIONS = {
    1: "first two joint axes parallel",
    2: "last two joint axes parallel",
    3: "first two joint axes intersect",
    4: "last two joint axes intersect",
    5: "first two joint axes orthogonal and all joint offsets zero",
    6: "mutually orthogonal joint axes and first joint offset zero",
    7: "mutually orthogonal joint axes, d3 < d2 and "
       "d4^2 > d3^2 (1 + (r2/(d2-d3))^2)",
}


def check_simplifying_conditions(p: RobotParams,
                                 eps: float = DEFAULT_TOLS.rule_eps) -> List[int]:
    """Design rules guaranteeing a non-cuspidal robot; any match suffices.

    Rule 7 requires d3 strictly below d2; at d3 = d2 the rule curve has a
    pole and the rule never matches (the numeric route decides there).
    """
    matched = []
    sa2, sa3 = math.sin(p.alpha2), math.sin(p.alpha3)
    ca2, ca3 = math.cos(p.alpha2), math.cos(p.alpha3)
    if abs(sa2) <= eps:
        matched.append(1)
    if abs(sa3) <= eps:
        matched.append(2)
    if abs(p.d2) <= eps:
        matched.append(3)
    if abs(p.d3) <= eps:
        matched.append(4)
    if abs(ca2) <= eps and abs(p.r2) <= eps and abs(p.r3) <= eps:
        matched.append(5)
    orthogonal = abs(ca2) <= eps and abs(ca3) <= eps
    if orthogonal and abs(p.r2) <= eps:
        matched.append(6)
    if orthogonal and p.d3 < p.d2 and p.d2 - p.d3 > eps:
        lhs = p.d4 * p.d4
        rhs = p.d3 * p.d3 * (1.0 + (p.r2 / (p.d2 - p.d3)) ** 2)
        if lhs > rhs:
            matched.append(7)
    return matched


# ---------------------------------------------------------------------------
# bifurcation curves of the (d3, d4) plane (d2 normalized to 1, r3 = 0)
# ---------------------------------------------------------------------------

def _ab(d3: float, r2: float, d2: float = 1.0) -> Tuple[float, float]:
    a = math.hypot(d3 + d2, r2)
    b = math.hypot(d3 - d2, r2)
    return a, b


def bifurcation_value(surface_id: str, d3: float, r2: float,
                      d2: float = 1.0) -> Optional[float]:
    """d4 value of the named bifurcation surface, or None outside its range.

    C1 bounds the void domain from above; C2 (d3 < d2) bounds the
    four-separated-posture domain from below; C3 (d3 > d2) separates the
    two- and four-cusp domains; C4 is printed in the literature identically
    to C2 and its analytic overlay is unreliable (numeric cusp counting is
    authoritative for the boundary it represents).
    """
    if d3 <= 0 or r2 <= 0 or d2 <= 0:
        return None
    a, b = _ab(d3, r2, d2)
    if surface_id == "C1":
        s = d3 * d3 + r2 * r2
        inner = 0.5 * (s - (s * s - d2 * d2 * (d3 * d3 - r2 * r2)) / (a * b))
        return math.sqrt(inner) if inner >= 0 else None
    if surface_id in ("C2", "C4"):
        if d3 >= d2:
            return None
        return d3 / (d2 - d3) * b
    if surface_id == "C3":
        if d3 <= d2:
            return None
        return d3 / (d3 - d2) * b
    raise ValueError(f"unknown bifurcation surface {surface_id!r}")


@dataclass(frozen=True)
class BifurcationSurfaces:
    """Evaluator bundle for one r2 section (d2 normalized)."""

    r2: float
    d2: float = 1.0

    def helpers(self, d3: float) -> Tuple[float, float]:
        return _ab(d3, self.r2, self.d2)

    def value(self, surface_id: str, d3: float) -> Optional[float]:
        return bifurcation_value(surface_id, d3, self.r2, self.d2)


# ---------------------------------------------------------------------------
# closed form and numeric counting
# ---------------------------------------------------------------------------

def is_cuspidal_closed_form(p: RobotParams,
                            band: float = DEFAULT_TOLS.closed_form_band) -> str:
    """'cuspidal' | 'non-cuspidal' | 'boundary' for orthogonal, r3 = 0 robots."""
    if not p.orthogonal():
        raise NonOrthogonalGeometry("closed form requires an orthogonal robot")
    if abs(p.r3) > 1e-12:
        raise NonOrthogonalGeometry("closed form requires r3 = 0")
    q = p.normalized()
    c1 = bifurcation_value("C1", q.d3, q.r2)
    if c1 is not None and abs(q.d4 - c1) <= band:
        return "boundary"
    if c1 is not None and q.d4 < c1:
        return "non-cuspidal"
    if q.d3 < 1.0:
        c2 = bifurcation_value("C2", q.d3, q.r2)
        if c2 is not None:
            if abs(q.d4 - c2) <= band:
                return "boundary"
            if q.d4 > c2:
                return "non-cuspidal"
    if abs(q.d3 - 1.0) <= band:
        return "cuspidal" if (c1 is None or q.d4 > c1) else "boundary"
    return "cuspidal"


def count_cusps_numeric(p: RobotParams, grid_n: int = TRACE_GRID,
                        tols: Tolerances = DEFAULT_TOLS) -> int:
    """Number of cusp points, by curve tracing with algebraic confirmation.

    The robot is normalized by d2 first (when possible) so counts are scale
    invariant.  For orthogonal robots a positive count is equivalent to
    cuspidality; for general twists it remains sufficient.
    """
    q = p.normalized() if p.d2 > 0 else p
    curves = trace_singularity_curves(q, grid_n, tols)
    cusps, _ = scan_cusps(q, curves, tols)
    return len(cusps)


@dataclass
class ClassificationResult:
    verdict: str                       # cuspidal | non-cuspidal | boundary
    cusp_count: int
    method: str                        # rule | closed-form | numeric
    matched_rules: List[int] = field(default_factory=list)
    domain_id: Optional[int] = None
    notes: List[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "cusp_count": self.cusp_count,
            "method": self.method,
            "matched_rules": self.matched_rules,
            "domain_id": self.domain_id,
            "notes": self.notes,
        }


def _domain_id(p: RobotParams, cusp_count: int) -> Optional[int]:
    """Atlas domain (1..5) for orthogonal r3 = 0 robots; None otherwise."""
    if not (p.orthogonal() and abs(p.r3) < 1e-12 and p.d2 > 0 and p.r2 > 0):
        return None
    q = p.normalized()
    c1 = bifurcation_value("C1", q.d3, q.r2)
    if cusp_count == 0:
        if c1 is not None and q.d4 < c1:
            return 1
        return 5
    if cusp_count == 2:
        return 3
    if cusp_count == 4:
        c3 = bifurcation_value("C3", q.d3, q.r2)
        if c3 is not None and q.d4 > c3:
            return 4
        return 2
    return None


def classify_robot(p: RobotParams, grid_n: int = TRACE_GRID,
                   compute_count: bool = True,
                   tols: Tolerances = DEFAULT_TOLS) -> ClassificationResult:
    """Full classification: rules, then closed form, then numeric count."""
    rules = check_simplifying_conditions(p, tols.rule_eps)
    notes: List[str] = []
    count = count_cusps_numeric(p, grid_n, tols) if compute_count else -1

    if rules:
        verdict, method = "non-cuspidal", "rule"
    elif p.orthogonal() and abs(p.r3) < 1e-12:
        verdict = is_cuspidal_closed_form(p, tols.closed_form_band)
        method = "closed-form"
        if verdict == "boundary":
            verdict = "boundary/indeterminate"
    else:
        if not compute_count:
            count = count_cusps_numeric(p, grid_n, tols)
        verdict = "cuspidal" if count > 0 else "non-cuspidal"
        method = "numeric"
        if not p.orthogonal():
            notes.append("cusp existence is sufficient for cuspidality; for "
                         "non-orthogonal robots a zero count is not a proof "
                         "of the converse")

    if compute_count and method != "numeric":
        expected_cuspidal = verdict == "cuspidal"
        if verdict not in ("boundary/indeterminate",) and \
                expected_cuspidal != (count > 0):
            notes.append(f"{method} verdict {verdict!r} disagrees with "
                         f"numeric cusp count {count} (parameters may sit "
                         "near a bifurcation surface)")
    return ClassificationResult(verdict, max(count, 0), method, rules,
                                _domain_id(p, count), notes)


# ---------------------------------------------------------------------------
# parameter-space atlas
# ---------------------------------------------------------------------------

@dataclass
class AtlasDomain:
    domain_id: int
    cusp_count: int
    n_cells: int
    sample: Tuple[float, float]        # (d3, d4) of a representative cell


@dataclass
class Atlas:
    r2: float
    r3: float
    d3_vals: np.ndarray
    d4_vals: np.ndarray
    counts: np.ndarray                 # (res, res) cusp count per cell
    domains: np.ndarray                # (res, res) domain id per cell
    table: List[AtlasDomain]
    curves: Dict[str, np.ndarray]      # analytic overlays (r3 = 0 only)


def atlas_scan(r2: float, r3: float, d3_range: Tuple[float, float],
               d4_range: Tuple[float, float], resolution: int = 64,
               trace_grid: int = ATLAS_TRACE_GRID,
               tols: Tolerances = DEFAULT_TOLS,
               alpha2: float = -math.pi / 2,
               alpha3: float = math.pi / 2) -> Atlas:
    """Cusp-count scan of a (d3, d4) section of the parameter space.

    Cells with equal counts are grouped into connected domains; for r3 = 0
    sections the analytic bifurcation curves are attached as overlays and
    domain ids follow the standard numbering (1 = void domain, 2/4 = four
    cusps, 3 = two cusps, 5 = four separated postures).  Components of
    equal count that the section cuts apart (the two pieces of domain 5
    boundary geometry) receive the same id.
    """
    if resolution < 1:
        raise ValueError("resolution must be positive")
    d3_vals = np.linspace(d3_range[0], d3_range[1], resolution)
    d4_vals = np.linspace(d4_range[0], d4_range[1], resolution)
    counts = np.zeros((resolution, resolution), dtype=int)
    for i, d3 in enumerate(d3_vals):
        for j, d4 in enumerate(d4_vals):
            robot = RobotParams(1.0, float(d3), float(d4), float(r2),
                                float(r3), alpha2, alpha3)
            counts[i, j] = count_cusps_numeric(robot, trace_grid, tols)

    counts = _despeckle(counts, tols.atlas_min_cells)
    domains, table = _group_domains(counts, d3_vals, d4_vals, r2, r3)

    curves: Dict[str, np.ndarray] = {}
    if abs(r3) < 1e-12:
        d3_dense = np.linspace(max(d3_range[0], 1e-3), d3_range[1], 512)
        for sid in ("C1", "C2", "C3"):
            pts = [(d3, bifurcation_value(sid, float(d3), r2))
                   for d3 in d3_dense]
            pts = [(a, b) for a, b in pts
                   if b is not None and d4_range[0] <= b <= d4_range[1]]
            if pts:
                curves[sid] = np.array(pts)
    return Atlas(r2, r3, d3_vals, d4_vals, counts, domains, table, curves)


def _despeckle(counts: np.ndarray, min_cells: int) -> np.ndarray:
    """Absorb connected count-components smaller than min_cells into their
    most common neighbouring count (anti-aliasing at domain boundaries)."""
    if min_cells <= 1:
        return counts
    out = counts.copy()
    for _ in range(4):
        changed = False
        for val in np.unique(out):
            lab, k = ndimage.label(out == val)
            for comp in range(1, k + 1):
                cells = np.argwhere(lab == comp)
                if len(cells) >= min_cells:
                    continue
                neigh: Dict[int, int] = {}
                for i, j in cells:
                    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                        a, b = i + di, j + dj
                        if 0 <= a < out.shape[0] and 0 <= b < out.shape[1] \
                                and lab[a, b] == 0:
                            neigh[out[a, b]] = neigh.get(out[a, b], 0) + 1
                if neigh:
                    best = max(neigh, key=neigh.get)
                    out[cells[:, 0], cells[:, 1]] = best
                    changed = True
        if not changed:
            break
    return out


def _group_domains(counts: np.ndarray, d3_vals: np.ndarray,
                   d4_vals: np.ndarray, r2: float, r3: float):
    res = counts.shape[0]
    comp_labels = np.zeros_like(counts)
    nxt = 1
    for val in np.unique(counts):
        lab, k = ndimage.label(counts == val)
        comp_labels += np.where(lab > 0, lab + nxt - 1, 0)
        nxt += k

    domains = np.zeros_like(counts)
    table: List[AtlasDomain] = []
    assigned: Dict[int, int] = {}
    next_extra = 6
    for comp in sorted(int(x) for x in np.unique(comp_labels) if x > 0):
        cells = np.argwhere(comp_labels == comp)
        count = int(counts[cells[0, 0], cells[0, 1]])
        did = None
        if abs(r3) < 1e-12:
            did = _section_domain_id(cells, d3_vals, d4_vals, r2, count)
        if did is None:
            did = next_extra
            next_extra += 1
        if did in assigned and table[assigned[did]].cusp_count == count:
            table[assigned[did]].n_cells += len(cells)
        else:
            mid = cells[len(cells) // 2]
            table.append(AtlasDomain(did, count, len(cells),
                                     (float(d3_vals[mid[0]]), float(d4_vals[mid[1]]))))
            assigned[did] = len(table) - 1
        domains[cells[:, 0], cells[:, 1]] = did
    table.sort(key=lambda d: d.domain_id)
    return domains, table


def _section_domain_id(cells: np.ndarray, d3_vals: np.ndarray,
                       d4_vals: np.ndarray, r2: float,
                       count: int) -> Optional[int]:
    """Majority vote of the per-cell domain predicates."""
    votes: Dict[int, int] = {}
    picks = cells[np.linspace(0, len(cells) - 1, min(64, len(cells)), dtype=int)]
    for i, j in picks:
        d3, d4 = float(d3_vals[i]), float(d4_vals[j])
        if count == 0:
            c1 = bifurcation_value("C1", d3, r2)
            c2 = bifurcation_value("C2", d3, r2)
            if c1 is not None and d4 < c1:
                did = 1
            elif c2 is not None and d4 > c2:
                did = 5
            else:
                continue
        elif count == 2:
            did = 3
        elif count == 4:
            c3 = bifurcation_value("C3", d3, r2)
            did = 4 if (c3 is not None and d4 > c3) else 2
        else:
            continue
        votes[did] = votes.get(did, 0) + 1
    if not votes:
        return None
    return max(votes, key=votes.get)
