"""Revisit planning over low-performance grid cells.

Flagged cells (mean PD below an operator threshold) are grouped into
connected components and covered by lawnmower legs orthogonal to the
original mission heading, so the revisit observes the terrain from a
complementary viewpoint. Components are visited greedy nearest-first.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import GeoGrid
from .errors import EmptyGrid


@dataclass
class RepairLeg:
    waypoints: list[tuple[float, float]]   # ordered (e, n)
    heading: float                         # rad from north
    cells: list[tuple[int, int]]           # covered repair cells (ix, iy)
    reason: str = "low_pd"


@dataclass
class RepairPlan:
    legs: list[RepairLeg]
    total_transit_m: float
    source_map_id: str
    threshold: float
    cell_size: float

    def to_json(self) -> dict:
        return {
            "source_map": self.source_map_id,
            "threshold": self.threshold,
            "cell_size": self.cell_size,
            "total_transit_m": self.total_transit_m,
            "legs": [{
                "waypoints": [[float(e), float(n)] for e, n in leg.waypoints],
                "heading": leg.heading,
                "cells": [list(c) for c in leg.cells],
                "reason": leg.reason,
            } for leg in self.legs],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))


def flag_cells(pd_grid: GeoGrid, cell_size: float, threshold: float) -> GeoGrid:
    """Aggregate a PD grid onto repair cells and flag mean PD < threshold.

    No-data PD cells are excluded from each mean; repair cells with no
    covered data stay unflagged.
    """
    if pd_grid.values.size == 0:
        raise EmptyGrid("PD grid is empty")
    if cell_size < pd_grid.cell_size:
        raise ValueError("repair cell size must be >= PD grid cell size")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")

    ratio = cell_size / pd_grid.cell_size
    w = int(np.ceil(pd_grid.width / ratio))
    h = int(np.ceil(pd_grid.height / ratio))
    sums = np.zeros((h, w))
    counts = np.zeros((h, w))
    v = pd_grid.values
    for iy in range(pd_grid.height):
        ry = int(iy / ratio)
        for ix in range(pd_grid.width):
            x = v[iy, ix]
            if not np.isnan(x):
                rx = int(ix / ratio)
                sums[ry, rx] += x
                counts[ry, rx] += 1
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    flagged = np.where(np.isnan(means), False, means < threshold)
    return GeoGrid(origin=pd_grid.origin, cell_size=cell_size,
                   values=flagged.astype(bool), nodata=0)


def _component_legs(grid: GeoGrid, cells: list[tuple[int, int]],
                    leg_heading: float) -> list[RepairLeg]:
    """Parallel lawnmower legs along `leg_heading` covering the cells."""
    cs = grid.cell_size
    le, ln = np.sin(leg_heading), np.cos(leg_heading)     # along-leg unit
    he, hn = np.cos(leg_heading), -np.sin(leg_heading)    # across-leg unit
    centers = np.array([grid.center_of(ix, iy) for ix, iy in cells])
    u = centers @ np.array([le, ln])       # along-leg coordinate
    t = centers @ np.array([he, hn])       # across-leg coordinate
    rows = np.round((t - t.min()) / cs).astype(int)

    legs = []
    for row in sorted(set(rows.tolist())):
        sel = rows == row
        row_cells = [cells[i] for i in np.where(sel)[0]]
        u_lo, u_hi = u[sel].min() - cs / 2, u[sel].max() + cs / 2
        t_row = float(t[sel].mean())
        p0 = (u_lo * le + t_row * he, u_lo * ln + t_row * hn)
        p1 = (u_hi * le + t_row * he, u_hi * ln + t_row * hn)
        legs.append(RepairLeg(waypoints=[p0, p1], heading=leg_heading,
                              cells=row_cells))
    # Boustrophedon ordering: alternate direction row to row.
    for i, leg in enumerate(legs):
        if i % 2 == 1:
            leg.waypoints = leg.waypoints[::-1]
    return legs


def plan_revisit(flagged: GeoGrid, mission_heading: float,
                 start: tuple[float, float],
                 orthogonal: bool = True,
                 source_map_id: str = "pd_map",
                 threshold: float = float("nan")) -> RepairPlan:
    """Cover flagged cells with legs, components in greedy nearest order.

    Legs run orthogonal to `mission_heading` (the multi-aspect default);
    set orthogonal=False for same-heading legs.
    """
    leg_heading = (mission_heading + (np.pi / 2 if orthogonal else 0.0)) % np.pi
    mask = flagged.values.astype(bool)
    labels, n_comp = ndimage.label(mask, structure=np.array(
        [[0, 1, 0], [1, 1, 1], [0, 1, 0]]))

    components = []
    for c in range(1, n_comp + 1):
        cells = [(int(ix), int(iy)) for iy, ix in np.argwhere(labels == c)]
        components.append(_component_legs(flagged, cells, leg_heading))

    ordered: list[RepairLeg] = []
    pos = np.array(start, dtype=float)
    total = 0.0
    remaining = list(components)
    while remaining:
        best, best_d, best_entry = None, np.inf, None
        for comp in remaining:
            for entry_rev in (False, True):
                first = comp[0].waypoints[0] if not entry_rev \
                    else comp[-1].waypoints[-1]
                d = float(np.hypot(first[0] - pos[0], first[1] - pos[1]))
                if d < best_d - 1e-12:
                    best, best_d, best_entry = comp, d, entry_rev
        remaining.remove(best)
        legs = best
        if best_entry:
            legs = [RepairLeg(waypoints=l.waypoints[::-1], heading=l.heading,
                              cells=l.cells, reason=l.reason)
                    for l in reversed(legs)]
        total += best_d
        for leg in legs:
            total += float(np.hypot(leg.waypoints[-1][0] - leg.waypoints[0][0],
                                    leg.waypoints[-1][1] - leg.waypoints[0][1]))
            ordered.append(leg)
        pos = np.array(ordered[-1].waypoints[-1])

    return RepairPlan(legs=ordered, total_transit_m=total,
                      source_map_id=source_map_id, threshold=threshold,
                      cell_size=flagged.cell_size)


def leg_covers_point(leg: RepairLeg, point: tuple[float, float],
                     half_width: float) -> bool:
    """Is the point inside the leg's swath rectangle (leg +/- half_width)?"""
    (x0, y0), (x1, y1) = leg.waypoints[0], leg.waypoints[-1]
    dx, dy = x1 - x0, y1 - y0
    length = np.hypot(dx, dy)
    if length < 1e-12:
        return np.hypot(point[0] - x0, point[1] - y0) <= half_width
    ux, uy = dx / length, dy / length
    px, py = point[0] - x0, point[1] - y0
    along = px * ux + py * uy
    across = abs(-px * uy + py * ux)
    return -1e-9 <= along <= length + 1e-9 and across <= half_width + 1e-9
