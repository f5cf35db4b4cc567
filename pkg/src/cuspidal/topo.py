"""Joint-space topology on the (theta2, theta3) torus.

Aspects are the connected components of {det J != 0}, computed by flood
fill over a periodic cell grid: a cell belongs to the interior only if the
determinant has one sign at its four corners, and two neighbouring interior
cells of equal sign are connected (their shared edge then carries no zero
crossing).  For orthogonal robots with r3 = 0 the determinant factors and
each factor's sign must be constant separately; otherwise cells containing
a crossing of two singular branches can have four equal-sign corners and
leak the fill between different aspects.

Characteristic surfaces are computed per internal boundary segment: at each
sample of the segment all inverse-kinematic solutions are taken, the
merging (singular) pair is discarded and the remaining non-singular
preimages are assigned to their aspects, chained along the boundary
parameter, and capped with the exact cusp preimages.  Rasterizing those
chains as barriers splits each aspect into basic regions; removing one
member of every duplicated basic-region pair (with its closure) yields the
maximal uniqueness domains, whose workspace images are the regions of
feasible paths.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .config import DEFAULT_TOLS, TOPO_GRID, WORKSPACE_GRID, Tolerances
from .errors import DegenerateElimination
from .ik import IkSolutionSet, ik_counts, inverse_kinematics
from .model import (RobotParams, det_jacobian, det_scale, rho_z,
                    singularity_factors, torus_delta, wrap_angle,
                    workspace_bounds)
from .singular import WorkspaceBoundary


# ---------------------------------------------------------------------------
# aspects
# ---------------------------------------------------------------------------

@dataclass
class AspectMap:
    """Periodic cell grid of aspect labels; 0 marks excluded cells."""

    grid_n: int
    labels: np.ndarray          # (n, n) int, cell (i, j) covers theta2_i, theta3_j
    det_sign: np.ndarray        # (n, n) sign of det J on each labelled cell
    aspect_ids: List[int]
    joint_limits: Optional[tuple] = None
    periodic: Tuple[bool, bool] = (True, True)

    @property
    def cell_size(self) -> float:
        return 2 * math.pi / self.grid_n

    def cell_of(self, theta2: float, theta3: float) -> Tuple[int, int]:
        h = self.cell_size
        i = int((wrap_angle(theta2) + math.pi) // h) % self.grid_n
        j = int((wrap_angle(theta3) + math.pi) // h) % self.grid_n
        return i, j

    def lookup(self, theta2: float, theta3: float) -> int:
        """Aspect id at a joint-space point; 0 when the cell is excluded."""
        return int(self.labels[self.cell_of(theta2, theta3)])

    def lookup_robust(self, theta2: float, theta3: float,
                      det_sign: float = 0.0) -> int:
        """Like lookup, but falls back to the nearest labelled neighbour.

        When det_sign is nonzero only cells of that determinant sign are
        considered, which keeps points hugging a singularity curve on
        their own side of it.
        """
        i, j = self.cell_of(theta2, theta3)
        n = self.grid_n

        def accept(a: int, b: int) -> int:
            l = int(self.labels[a, b])
            if l and (det_sign == 0.0 or self.det_sign[a, b] == np.sign(det_sign)):
                return l
            return 0

        hit = accept(i, j)
        if hit:
            return hit
        for radius in (1, 2, 3, 4):
            for di in range(-radius, radius + 1):
                for dj in range(-radius, radius + 1):
                    if max(abs(di), abs(dj)) != radius:
                        continue
                    hit = accept((i + di) % n, (j + dj) % n)
                    if hit:
                        return hit
        return 0

    def cells(self, aspect_id: int) -> np.ndarray:
        return np.argwhere(self.labels == aspect_id)

    def cell_center(self, i: int, j: int) -> Tuple[float, float]:
        h = self.cell_size
        return (-math.pi + (i + 0.5) * h, -math.pi + (j + 0.5) * h)


def _torus_components(mask_by_sign: Dict[int, np.ndarray],
                      periodic: Tuple[bool, bool]) -> np.ndarray:
    """Label connected components per sign, merged across periodic seams."""
    n = next(iter(mask_by_sign.values())).shape[0]
    lab = np.zeros((n, n), dtype=np.int32)
    nxt = 1
    for s, mask in mask_by_sign.items():
        l, k = ndimage.label(mask)
        l = l.astype(np.int32)
        l[l > 0] += nxt - 1
        lab += l
        nxt += k

    parent = list(range(nxt))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    if periodic[0]:
        for j in range(n):
            a, b = lab[0, j], lab[n - 1, j]
            if a > 0 and b > 0:
                union(int(a), int(b))
    if periodic[1]:
        for i in range(n):
            a, b = lab[i, 0], lab[i, n - 1]
            if a > 0 and b > 0:
                union(int(a), int(b))

    out = np.zeros_like(lab)
    remap: Dict[int, int] = {}
    # deterministic ids by first (row-major) cell of each component
    flat_order = np.argsort(lab.ravel(), kind="stable")
    nzi, nzj = np.nonzero(lab)
    order = sorted(zip(nzi.tolist(), nzj.tolist()))
    for i, j in order:
        r = find(int(lab[i, j]))
        if r not in remap:
            remap[r] = len(remap) + 1
        out[i, j] = remap[r]
    return out


def compute_aspects(p: RobotParams, grid_n: int = TOPO_GRID,
                    tols: Tolerances = DEFAULT_TOLS) -> AspectMap:
    """Flood fill of sign-consistent det J != 0 cells with torus wraparound.

    Joint limits on theta2/theta3, when present, mask the grid and switch
    off wraparound per limited axis (box adjacency).
    """
    if grid_n < 128:
        raise ValueError("grid_n must be >= 128")
    n = grid_n
    th = -math.pi + 2 * math.pi * np.arange(n) / n

    def corner_ok(F) -> Tuple[np.ndarray, np.ndarray]:
        V = np.asarray(F(th[:, None], th[None, :]), dtype=float) + np.zeros((n, n))
        s = np.sign(np.where(V == 0.0, 1e-300, V))
        same = ((s == np.roll(s, -1, axis=0)) & (s == np.roll(s, -1, axis=1))
                & (s == np.roll(np.roll(s, -1, axis=0), -1, axis=1)))
        return same, s

    det_ok, det_sign = corner_ok(lambda a, b: det_jacobian(p, a, b))
    if p.orthogonal() and abs(p.r3) < 1e-12:
        first, second = singularity_factors(p)
        ok1, _ = corner_ok(first)
        ok2, _ = corner_ok(second)
        interior = ok1 & ok2
    else:
        interior = det_ok

    periodic = (True, True)
    if p.joint_limits is not None:
        lims = p.joint_limits
        centers = th + math.pi / n
        mask2 = (centers >= lims[1][0]) & (centers <= lims[1][1])
        mask3 = (centers >= lims[2][0]) & (centers <= lims[2][1])
        interior = interior & mask2[:, None] & mask3[None, :]
        periodic = (lims[1][1] - lims[1][0] >= 2 * math.pi - 1e-12,
                    lims[2][1] - lims[2][0] >= 2 * math.pi - 1e-12)

    labels = _torus_components(
        {1: interior & (det_sign > 0), -1: interior & (det_sign < 0)}, periodic)
    ids = sorted(int(x) for x in np.unique(labels) if x > 0)
    return AspectMap(n, labels, np.where(labels > 0, det_sign, 0), ids,
                     p.joint_limits, periodic)


def label_solutions(aspects: AspectMap, solset: IkSolutionSet) -> IkSolutionSet:
    """Fill the aspect id of every solution in the set (in place)."""
    for s in solset.solutions:
        s.aspect_id = aspects.lookup_robust(s.config.theta2, s.config.theta3)
    return solset


# ---------------------------------------------------------------------------
# characteristic surfaces
# ---------------------------------------------------------------------------

@dataclass
class CharSurfaceChain:
    aspect_id: int
    segment_label: str          # BS label the chain is a preimage of
    points: np.ndarray          # (m, 2) unwrapped (theta2, theta3)
    junction_start: Optional[np.ndarray] = None  # attached cusp preimages
    junction_end: Optional[np.ndarray] = None

    def label(self) -> str:
        return f"CS{self.aspect_id},{self.segment_label[2:]}"


@dataclass
class CharSurfaceSet:
    chains: List[CharSurfaceChain]
    skipped_samples: int = 0

    def by_aspect(self) -> Dict[int, List[CharSurfaceChain]]:
        out: Dict[int, List[CharSurfaceChain]] = {}
        for c in self.chains:
            out.setdefault(c.aspect_id, []).append(c)
        return out


def _merging_pair(solutions: List, tols: Tolerances) -> Tuple[set, bool]:
    """Indices of the fold (merging) solutions at a boundary sample.

    The fold pair can surface as two near-coincident entries, as one
    clustered double-root entry, or not at all (the double root off to the
    complex plane); all three are handled.  Samples too close to a cusp
    (triple clusters, or a third solution not clearly separated from the
    pair) are reported ambiguous and skipped by the caller.
    """
    m = len(solutions)
    if m < 2:
        return set(), False
    if any(s.merge_multiplicity >= 3 for s in solutions):
        return set(), True
    flagged = {i for i, s in enumerate(solutions)
               if s.near_coincident or s.merge_multiplicity > 1}
    if len(flagged) > 2:
        return set(), True
    if flagged:
        return flagged, False
    if m <= 2:
        return set(), False  # fold escaped to the complex plane
    dists = []
    for i in range(m):
        for j in range(i + 1, m):
            dists.append((solutions[i].config.torus_distance(solutions[j].config), i, j))
    dists.sort()
    d0, i0, j0 = dists[0]
    if d0 > 0.3:
        return set(), False
    if len(dists) > 1 and dists[1][0] < 3.0 * d0:
        return set(), True
    return {i0, j0}, False


def characteristic_surfaces(p: RobotParams, aspects: AspectMap,
                            boundary: WorkspaceBoundary,
                            samples_per_segment: int = 400,
                            tols: Tolerances = DEFAULT_TOLS) -> CharSurfaceSet:
    """Non-singular preimages of the internal boundary, per aspect.

    Every chain CS_{i,j} is the part of the preimage of segment BS_j lying
    in aspect i; adjacent chains meet at preimages of the shared cusp.
    """
    chains: List[CharSurfaceChain] = []
    skipped = 0
    cusp_preimages = _cusp_preimages(p, boundary, tols)

    for seg in boundary.segments:
        m = len(seg.image_samples)
        picks = np.linspace(0, m - 1, min(samples_per_segment, m), dtype=int)
        # strands keyed by determinant sign, extended in boundary-parameter
        # order so tangential double-backs keep their geometry
        strands: List[dict] = []
        for k in picks:
            rho, z = seg.image_samples[k]
            if rho < 0:
                continue
            try:
                sols = inverse_kinematics(p, rho, 0.0, z, tols)
            except DegenerateElimination:
                skipped += 1
                continue
            merging, ambiguous = _merging_pair(sols.solutions, tols)
            if ambiguous:
                skipped += 1
                continue
            for idx, s in enumerate(sols.solutions):
                if idx in merging:
                    continue
                dj = float(det_jacobian(p, s.config.theta2, s.config.theta3))
                sgn = 1.0 if dj > 0 else -1.0
                q = np.array([s.config.theta2, s.config.theta3])
                best, bestd = None, 0.35
                for st in strands:
                    if st["sign"] != sgn or st["last_k"] == k:
                        continue
                    d = float(np.linalg.norm(torus_delta(q, st["pts"][-1])))
                    if d < bestd:
                        best, bestd = st, d
                if best is None:
                    strands.append({"sign": sgn, "last_k": k, "pts": [q],
                                    "best_q": q, "best_dj": abs(dj)})
                else:
                    best["pts"].append(best["pts"][-1]
                                       + torus_delta(q, best["pts"][-1]))
                    best["last_k"] = k
                    if abs(dj) > best["best_dj"]:
                        best["best_dj"] = abs(dj)
                        best["best_q"] = q
        strands = _merge_strands(strands)
        for st in strands:
            if len(st["pts"]) < 3:
                skipped += len(st["pts"])
                continue
            chain = np.array(st["pts"])
            # aspect decided at the strand's most interior point
            aid = aspects.lookup_robust(st["best_q"][0], st["best_q"][1],
                                        st["sign"])
            if aid == 0:
                skipped += len(st["pts"])
                continue
            start_j, end_j = None, None
            if seg.start_cusp is not None:
                start_j = _nearest_cusp_preimage(
                    cusp_preimages.get(seg.start_cusp, []), chain[0])
                if start_j is not None:
                    chain = np.vstack([chain[0] + torus_delta(start_j, chain[0]), chain])
            if seg.end_cusp is not None:
                end_j = _nearest_cusp_preimage(
                    cusp_preimages.get(seg.end_cusp, []), chain[-1])
                if end_j is not None:
                    chain = np.vstack([chain, chain[-1] + torus_delta(end_j, chain[-1])])
            chains.append(CharSurfaceChain(aid, seg.label, chain,
                                           start_j, end_j))
    chains.sort(key=lambda c: (c.aspect_id, c.segment_label))
    return CharSurfaceSet(chains, skipped)


def _merge_strands(strands: List[dict], join_tol: float = 0.6) -> List[dict]:
    """Stitch strand fragments of one preimage arc back together.

    Sampling gaps (skipped ambiguous samples near cusps) can split an arc;
    fragments of the same aspect whose ends lie within join_tol are joined,
    trying all four end orientations, closest pair first.
    """
    strands = [dict(s) for s in strands]
    merged = True
    while merged and len(strands) > 1:
        merged = False
        best = None
        for a in range(len(strands)):
            for b in range(a + 1, len(strands)):
                if strands[a]["sign"] != strands[b]["sign"]:
                    continue
                pa, pb = strands[a]["pts"], strands[b]["pts"]
                ends = [(pa[-1], pb[0], False, False), (pa[-1], pb[-1], False, True),
                        (pa[0], pb[0], True, False), (pa[0], pb[-1], True, True)]
                for ea, eb, flip_a, flip_b in ends:
                    d = float(np.linalg.norm(torus_delta(np.asarray(eb),
                                                         np.asarray(ea))))
                    if d < join_tol and (best is None or d < best[0]):
                        best = (d, a, b, flip_a, flip_b)
        if best is not None:
            _, a, b, flip_a, flip_b = best
            pa = strands[a]["pts"][::-1] if flip_a else strands[a]["pts"]
            pb = strands[b]["pts"][::-1] if flip_b else strands[b]["pts"]
            joined = list(pa)
            for q in pb:
                joined.append(joined[-1] + torus_delta(np.asarray(q), joined[-1]))
            strands[a]["pts"] = joined
            if strands[b]["best_dj"] > strands[a]["best_dj"]:
                strands[a]["best_dj"] = strands[b]["best_dj"]
                strands[a]["best_q"] = strands[b]["best_q"]
            del strands[b]
            merged = True
    return strands


def _cusp_preimages(p: RobotParams, boundary: WorkspaceBoundary,
                    tols: Tolerances) -> Dict[int, List[np.ndarray]]:
    """All preimages (triple point and regular points) of each cusp."""
    out: Dict[int, List[np.ndarray]] = {}
    for k, c in enumerate(boundary.cusps):
        pts = [np.array([c.theta2, c.theta3])]
        try:
            sols = inverse_kinematics(p, c.rho, 0.0, c.z, tols)
            for s in sols.solutions:
                q = np.array([s.config.theta2, s.config.theta3])
                if np.linalg.norm(torus_delta(q, pts[0])) > 1e-3:
                    pts.append(q)
        except DegenerateElimination:
            pass
        out[k] = pts
    return out


def _nearest_cusp_preimage(preimages: List[np.ndarray],
                           ref: np.ndarray) -> Optional[np.ndarray]:
    best, bestd = None, math.inf
    for q in preimages:
        d = float(np.linalg.norm(torus_delta(q, ref)))
        if d < bestd:
            best, bestd = q, d
    return best


# ---------------------------------------------------------------------------
# workspace raster
# ---------------------------------------------------------------------------

@dataclass
class WorkspaceGrid:
    rho_max: float
    z_min: float
    z_max: float
    n: int

    def centers(self):
        rho = (np.arange(self.n) + 0.5) * self.rho_max / self.n
        z = self.z_min + (np.arange(self.n) + 0.5) * (self.z_max - self.z_min) / self.n
        return rho, z

    def cell_of(self, rho: float, z: float) -> Optional[Tuple[int, int]]:
        i = int(rho / self.rho_max * self.n)
        j = int((z - self.z_min) / (self.z_max - self.z_min) * self.n)
        if 0 <= i < self.n and 0 <= j < self.n:
            return i, j
        return None


def _workspace_regions(p: RobotParams, boundary: WorkspaceBoundary,
                       grid_n: int, tols: Tolerances):
    """(grid, region_labels, region_counts) via boundary-barrier flood fill.

    Regions are connected components of the cross-section minus the images
    of all singular curves; each region's IK count is taken as the majority
    count over sample cells.
    """
    rho_max, z_min, z_max = workspace_bounds(p)
    grid = WorkspaceGrid(rho_max, z_min, z_max, grid_n)
    barrier = np.zeros((grid_n, grid_n), bool)
    for bc in boundary.curves:
        img = bc.image
        closed = True
        pts = img
        for k in range(len(pts) - (0 if closed else 1)):
            a = pts[k]
            b = pts[(k + 1) % len(pts)]
            if np.linalg.norm(b - a) > 0.2 * max(rho_max, z_max - z_min):
                continue
            _rasterize_segment(grid, barrier, a, b)
    free = ~barrier
    lab, nreg = ndimage.label(free)
    # majority IK count per region (vectorized batch per region)
    rho_c, z_c = grid.centers()
    RR, ZZ = np.meshgrid(rho_c, z_c, indexing="ij")
    counts = np.full(nreg + 1, -1, dtype=int)
    region_labels = np.asarray(lab)
    for rid in range(1, nreg + 1):
        cells = np.argwhere(region_labels == rid)
        if len(cells) == 0:
            continue
        picks = cells[np.linspace(0, len(cells) - 1,
                                  min(32, len(cells)), dtype=int)]
        R = RR[picks[:, 0], picks[:, 1]] ** 2
        Z = ZZ[picks[:, 0], picks[:, 1]]
        try:
            c = ik_counts(p, R, Z, tols)
        except DegenerateElimination:
            c = np.zeros(len(picks), dtype=int)
        vals, freq = np.unique(c, return_counts=True)
        counts[rid] = int(vals[np.argmax(freq)])
    return grid, region_labels, counts


def _rasterize_segment(grid: WorkspaceGrid, canvas: np.ndarray,
                       a: np.ndarray, b: np.ndarray):
    n = int(np.ceil(np.linalg.norm(b - a) /
                    min(grid.rho_max, grid.z_max - grid.z_min) * grid.n * 2)) + 1
    for t in np.linspace(0.0, 1.0, n):
        pt = a + (b - a) * t
        c = grid.cell_of(pt[0], pt[1])
        if c is not None:
            canvas[c] = True


# ---------------------------------------------------------------------------
# basic regions, uniqueness domains, feasible regions
# ---------------------------------------------------------------------------

@dataclass
class BasicRegion:
    """One component Ra_{i,j} of an aspect cut along characteristic surfaces."""

    aspect_id: int
    index_in_aspect: int        # j of Ra_{i,j}
    ws_region: int              # workspace region id the component maps onto
    ws_count: int               # IK count of that region
    cells: np.ndarray           # (m, 2) cell indices

    def label(self) -> str:
        return f"Ra{self.aspect_id}{self.index_in_aspect}"


@dataclass
class RegionPartition:
    aspects: AspectMap
    char_surfaces: CharSurfaceSet
    ra_labels: np.ndarray       # (n, n) int; 0 = not in any Ra (barrier/singular)
    regions: List[BasicRegion]
    ws_grid: WorkspaceGrid
    ws_labels: np.ndarray       # (m, m) workspace region ids, 0 = boundary
    ws_counts: np.ndarray       # per-region IK count, index = region id

    def region_by_label(self, label: str) -> BasicRegion:
        for r in self.regions:
            if r.label() == label:
                return r
        raise KeyError(label)


def partition_regions(p: RobotParams, aspects: AspectMap,
                      char_surfaces: CharSurfaceSet,
                      boundary: WorkspaceBoundary,
                      ws_grid_n: int = WORKSPACE_GRID,
                      tols: Tolerances = DEFAULT_TOLS) -> RegionPartition:
    """Cut aspects along rasterized characteristic surfaces into basic
    regions and associate each with its workspace region."""
    n = aspects.grid_n
    barrier = np.zeros((n, n), bool)
    h = aspects.cell_size
    for chain in char_surfaces.chains:
        pts = chain.points
        for k in range(len(pts) - 1):
            a, b = pts[k], pts[k + 1]
            step = np.linalg.norm(b - a)
            if step > 1.0:
                continue  # chain discontinuity guard
            m = int(step / (0.5 * h)) + 1
            for t in np.linspace(0.0, 1.0, m + 1):
                q = a + (b - a) * t
                i = int((wrap_angle(q[0]) + math.pi) // h) % n
                j = int((wrap_angle(q[1]) + math.pi) // h) % n
                barrier[i, j] = True

    interior = (aspects.labels > 0) & ~barrier
    masks = {}
    for aid in aspects.aspect_ids:
        masks[aid] = interior & (aspects.labels == aid)
    ra_raw = _torus_components(masks, aspects.periodic)

    ws_grid, ws_labels, ws_counts = _workspace_regions(p, boundary, ws_grid_n, tols)

    comp_ids = sorted(int(x) for x in np.unique(ra_raw) if x > 0)
    drafts = []
    for comp in comp_ids:
        cells = np.argwhere(ra_raw == comp)
        aid = int(aspects.labels[cells[0, 0], cells[0, 1]])
        # map sample cells to workspace regions
        picks = cells[np.linspace(0, len(cells) - 1, min(48, len(cells)), dtype=int)]
        votes: Dict[int, int] = {}
        for i, j in picks:
            t2, t3 = aspects.cell_center(int(i), int(j))
            rho, z = (float(x) for x in rho_z(p, t2, t3))
            c = ws_grid.cell_of(rho, z)
            if c is None:
                continue
            rid = int(ws_labels[c])
            if rid > 0:
                votes[rid] = votes.get(rid, 0) + 1
        ws_region = max(votes, key=votes.get) if votes else 0
        count = int(ws_counts[ws_region]) if ws_region > 0 else -1
        drafts.append((aid, ws_region, count, cells, comp))

    # tiny slivers (rasterization debris) are dropped from the Ra inventory
    min_cells = max(4, (n // 128) ** 2)
    drafts = [d for d in drafts if len(d[3]) >= min_cells]

    # deterministic j numbering inside each aspect: higher IK count first,
    # then region id, then first cell
    regions: List[BasicRegion] = []
    ra_labels = np.zeros_like(ra_raw)
    for aid in aspects.aspect_ids:
        mine = [d for d in drafts if d[0] == aid]
        mine.sort(key=lambda d: (-d[2], d[1], d[3][0, 0] * n + d[3][0, 1]))
        for jdx, (a, wsr, cnt, cells, comp) in enumerate(mine, start=1):
            regions.append(BasicRegion(aid, jdx, wsr, cnt, cells))
            ra_labels[ra_raw == comp] = len(regions)
    return RegionPartition(aspects, char_surfaces, ra_labels, regions,
                           ws_grid, ws_labels, ws_counts)


@dataclass
class UniquenessDomain:
    label: str                  # "Qu1", ...
    aspect_id: int
    removed: List[str]          # labels of removed basic regions
    cells: np.ndarray           # (m, 2) cell indices

    def cell_set(self) -> set:
        return {(int(i), int(j)) for i, j in self.cells}


def uniqueness_domains(partition: RegionPartition) -> List[UniquenessDomain]:
    """Maximal uniqueness domains: per aspect, remove the closure of one
    member of every duplicated basic-region group (all combinations)."""
    aspects = partition.aspects
    n = aspects.grid_n
    out: List[UniquenessDomain] = []

    for aid in aspects.aspect_ids:
        mine = [r for r in partition.regions if r.aspect_id == aid]
        groups: Dict[int, List[BasicRegion]] = {}
        for r in mine:
            groups.setdefault(r.ws_region, []).append(r)
        dup_groups = [g for g in groups.values() if len(g) > 1]
        aspect_mask = aspects.labels == aid

        if not dup_groups:
            cells = np.argwhere(aspect_mask)
            out.append(UniquenessDomain("", aid, [], cells))
            continue

        for choice in itertools.product(*dup_groups):
            mask = aspect_mask.copy()
            removed = []
            for r in choice:
                rm = np.zeros((n, n), bool)
                rm[r.cells[:, 0], r.cells[:, 1]] = True
                # closure: the removed set plus its 8-neighbourhood
                grown = rm.copy()
                for di in (-1, 0, 1):
                    for dj in (-1, 0, 1):
                        grown |= np.roll(np.roll(rm, di, axis=0), dj, axis=1)
                mask &= ~grown
                removed.append(r.label())
            out.append(UniquenessDomain("", aid, sorted(removed), np.argwhere(mask)))

    out.sort(key=lambda d: (d.aspect_id, d.removed))
    for k, d in enumerate(out, start=1):
        d.label = f"Qu{k}"
    return out


@dataclass
class FeasibleRegion:
    label: str                  # "Wf1", ...
    qu_label: str
    raster: np.ndarray          # (m, m) bool on the workspace grid
    slits: List[str]            # BS labels removed with the closure
    slit_polylines: List[np.ndarray]


def feasible_regions(p: RobotParams, partition: RegionPartition,
                     domains: List[UniquenessDomain],
                     boundary: WorkspaceBoundary) -> List[FeasibleRegion]:
    """Workspace images of the uniqueness domains, with the internal
    boundary segments removed by the closure marked as uncrossable slits."""
    grid = partition.ws_grid
    aspects = partition.aspects
    out: List[FeasibleRegion] = []
    for k, dom in enumerate(domains, start=1):
        raster = np.zeros((grid.n, grid.n), bool)
        for i, j in dom.cells:
            t2, t3 = aspects.cell_center(int(i), int(j))
            rho, z = (float(x) for x in rho_z(p, t2, t3))
            c = grid.cell_of(rho, z)
            if c is not None:
                raster[c] = True
        raster = ndimage.binary_closing(raster, np.ones((3, 3)))
        slits: List[str] = []
        polylines: List[np.ndarray] = []
        removed_mask = np.zeros((aspects.grid_n, aspects.grid_n), bool)
        for lbl in dom.removed:
            r = partition.region_by_label(lbl)
            removed_mask[r.cells[:, 0], r.cells[:, 1]] = True
        if dom.removed:
            grown = removed_mask.copy()
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    grown |= np.roll(np.roll(removed_mask, di, 0), dj, 1)
            for chain in partition.char_surfaces.chains:
                if chain.aspect_id != dom.aspect_id:
                    continue
                pts = chain.points[:: max(1, len(chain.points) // 64)]
                hits = 0
                h = aspects.cell_size
                for q in pts:
                    i = int((wrap_angle(q[0]) + math.pi) // h) % aspects.grid_n
                    j = int((wrap_angle(q[1]) + math.pi) // h) % aspects.grid_n
                    if grown[i, j]:
                        hits += 1
                # a chain bounds the removed region only if a substantial
                # share of it is adjacent (junction grazing is not enough)
                if hits >= 0.15 * len(pts) and chain.segment_label not in slits:
                    slits.append(chain.segment_label)
        for seg in boundary.segments:
            if seg.label in slits:
                polylines.append(seg.image_samples)
        out.append(FeasibleRegion(f"Wf{k}", dom.label, raster, sorted(slits),
                                  polylines))
    return out
