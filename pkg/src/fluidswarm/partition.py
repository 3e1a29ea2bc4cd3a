"""Cubic control-volume partition of the duct and nearest-cell assignment.

The duct's bounding box is tiled with axis-aligned cubes of edge length l.
Each cube averages the reference-field nodes that fall inside it into a
velocity target and a pressure target; cubes overlapping the duct volume are
flagged ``inside``. Agents are mapped to cubes by nearest center, which for a
regular lattice reduces to coordinate-wise floor division.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .reference_field import GasModel, NozzleGeometry, ReferenceField, _FMT

PARTITION_HEADER = "jx,jy,jz,cx,cy,cz,inside,node_count,vtx,vty,vtz,pt"


@dataclass
class ControlVolumeGrid:
    """Regular lattice of cubic cells with per-cell flow targets.

    Flat cell indices use C order over ``dims`` = (nx, ny, nz):
    flat = (jx * ny + jy) * nz + jz. All per-cell arrays are flat.
    """

    origin: np.ndarray            # (3,) lattice corner
    edge_length: float
    dims: tuple[int, int, int]
    inside: np.ndarray            # (M,) bool: cell overlaps the duct volume
    node_count: np.ndarray        # (M,) int
    v_target: np.ndarray          # (M, 3) node-mean velocity (NaN if empty)
    p_target: np.ndarray          # (M,) node-mean gauge pressure (NaN if empty)
    rho_target: np.ndarray        # (M,) gas density from p_target (NaN without gas)
    geometry: NozzleGeometry | None = field(default=None, compare=False)
    gas: GasModel | None = field(default=None, compare=False)

    @property
    def num_cells(self) -> int:
        return int(np.prod(self.dims))

    @property
    def cell_volume(self) -> float:
        return self.edge_length ** 3

    @property
    def valid(self) -> np.ndarray:
        """Cells eligible for fitting: inside the duct and non-empty."""
        return self.inside & (self.node_count > 0)

    def centers(self) -> np.ndarray:
        """(M, 3) cell centers in flat order."""
        nx, ny, nz = self.dims
        jx, jy, jz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz),
                                 indexing="ij")
        idx = np.column_stack([jx.ravel(), jy.ravel(), jz.ravel()])
        return self.origin + (idx + 0.5) * self.edge_length

    def unravel(self, flat) -> np.ndarray:
        return np.column_stack(np.unravel_index(np.asarray(flat), self.dims))

    def ravel(self, triples) -> np.ndarray:
        t = np.atleast_2d(np.asarray(triples))
        return np.ravel_multi_index((t[:, 0], t[:, 1], t[:, 2]), self.dims)


def assign_cell(positions, grid: ControlVolumeGrid) -> np.ndarray:
    """Nearest-center cell for each position (flat indices).

    Floor division on the shifted coordinates; a point exactly on a face is
    equidistant between two centers and goes to the lower flat index. Points
    beyond the lattice clamp to the boundary cells (still the nearest center).
    """
    p = np.atleast_2d(np.asarray(positions, dtype=float))
    t = (p - grid.origin) / grid.edge_length
    idx = np.floor(t).astype(np.int64)
    on_face = (t == np.floor(t)) & (idx > 0)
    idx[on_face] -= 1
    idx = np.clip(idx, 0, np.asarray(grid.dims) - 1)
    flat = np.ravel_multi_index((idx[:, 0], idx[:, 1], idx[:, 2]), grid.dims)
    return flat if np.asarray(positions).ndim > 1 else int(flat[0])


def _inside_mask(origin, edge, dims, geometry: NozzleGeometry) -> np.ndarray:
    """Cells whose cube intersects the duct volume.

    A cube meets the duct iff some x in its clipped span has wall radius at
    least the cube's y-z distance to the axis. The radius profile is unimodal
    (single minimum at the throat), so its maximum over a span sits at one of
    the span's endpoints.
    """
    nx, ny, nz = dims
    x0 = origin[0] + np.arange(nx) * edge
    x1 = x0 + edge
    lo = np.clip(x0, 0.0, geometry.length)
    hi = np.clip(x1, 0.0, geometry.length)
    r_span = np.maximum(geometry.radius(lo), geometry.radius(hi))
    in_x = (x1 > 0.0) & (x0 < geometry.length)

    def axis_dist(o, n):
        a0 = o + np.arange(n) * edge
        a1 = a0 + edge
        return np.maximum.reduce([a0, -a1, np.zeros(n)])

    dy = axis_dist(origin[1], ny)
    dz = axis_dist(origin[2], nz)
    d = np.hypot(dy[:, None], dz[None, :])                     # (ny, nz)
    mask = (d[None, :, :] <= r_span[:, None, None]) & in_x[:, None, None]
    return mask.reshape(-1)


def partition_domain(fld: ReferenceField, geometry: NozzleGeometry | None = None,
                     edge_length: float = 0.5,
                     gas: GasModel | None = None) -> ControlVolumeGrid:
    """Partition the duct into cubes and average the field into targets.

    The lattice origin snaps to (0, -R, -R) with R the maximum wall radius
    rounded up to a whole number of edges, so the duct is fully covered.
    Nodes are binned by the same nearest-center rule used for agents; every
    node lands in exactly one cell.
    """
    geometry = geometry or fld.geometry
    if geometry is None:
        raise ValueError("a geometry is required (none attached to the field)")
    gas = gas or fld.gas
    if edge_length <= 0:
        raise ValueError("edge_length must be positive")

    half = np.ceil(geometry.max_radius / edge_length) * edge_length
    origin = np.array([0.0, -half, -half])
    nx = int(np.ceil(geometry.length / edge_length - 1e-12))
    nyz = int(round(2 * half / edge_length))
    dims = (nx, nyz, nyz)

    grid = ControlVolumeGrid(
        origin=origin, edge_length=edge_length, dims=dims,
        inside=_inside_mask(origin, edge_length, dims, geometry),
        node_count=np.zeros(int(np.prod(dims)), dtype=np.int64),
        v_target=np.full((int(np.prod(dims)), 3), np.nan),
        p_target=np.full(int(np.prod(dims)), np.nan),
        rho_target=np.full(int(np.prod(dims)), np.nan),
        geometry=geometry, gas=gas)

    flat = assign_cell(fld.positions, grid)
    m = grid.num_cells
    cnt = np.bincount(flat, minlength=m)
    grid.node_count = cnt
    occ = cnt > 0
    for a in range(3):
        s = np.bincount(flat, weights=fld.velocities[:, a], minlength=m)
        grid.v_target[occ, a] = s[occ] / cnt[occ]
    ps = np.bincount(flat, weights=fld.pressures, minlength=m)
    grid.p_target[occ] = ps[occ] / cnt[occ]
    if gas is not None:
        grid.rho_target[occ] = gas.density_from_gauge(grid.p_target[occ])
    return grid


# ======================================================================
# wire format
# ======================================================================

def save_partition(grid: ControlVolumeGrid, path) -> None:
    """Write the per-cell table; lattice and geometry ride in '#' metadata."""
    lines = [_metadata_line(grid), PARTITION_HEADER]
    trip = grid.unravel(np.arange(grid.num_cells))
    centers = grid.centers()
    for f in range(grid.num_cells):
        vt = grid.v_target[f]
        row = [str(trip[f, 0]), str(trip[f, 1]), str(trip[f, 2]),
               _FMT % centers[f, 0], _FMT % centers[f, 1], _FMT % centers[f, 2],
               str(int(grid.inside[f])), str(int(grid.node_count[f])),
               _FMT % vt[0], _FMT % vt[1], _FMT % vt[2],
               _FMT % grid.p_target[f]]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _metadata_line(grid: ControlVolumeGrid) -> str:
    kv = {
        "edge_length": grid.edge_length,
        "origin_x": grid.origin[0], "origin_y": grid.origin[1],
        "origin_z": grid.origin[2],
        "nx": grid.dims[0], "ny": grid.dims[1], "nz": grid.dims[2],
    }
    if grid.geometry is not None:
        g = grid.geometry
        kv.update(length=g.length, inlet_radius=g.inlet_radius,
                  outlet_radius=g.outlet_radius, throat_radius=g.throat_radius,
                  throat_x=g.throat_x)
    if grid.gas is not None:
        kv.update(gamma=grid.gas.gamma, inlet_density=grid.gas.inlet_density,
                  inlet_sound_speed=grid.gas.inlet_sound_speed)
    return "# " + " ".join(f"{k}={v:.12g}" if isinstance(v, float) else f"{k}={v}"
                           for k, v in kv.items())


def load_partition(path) -> ControlVolumeGrid:
    """Read a partition table written by :func:`save_partition`."""
    meta: dict[str, float] = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    k, _, v = tok.partition("=")
                    meta[k] = float(v)
                continue
            if line == PARTITION_HEADER:
                continue
            rows.append(line.split(","))
    needed = {"edge_length", "origin_x", "origin_y", "origin_z", "nx", "ny", "nz"}
    if not needed <= meta.keys():
        raise ValueError(f"{path}: missing lattice metadata {sorted(needed - meta.keys())}")
    dims = (int(meta["nx"]), int(meta["ny"]), int(meta["nz"]))
    m = int(np.prod(dims))
    if len(rows) != m:
        raise ValueError(f"{path}: expected {m} cell rows, got {len(rows)}")

    geometry = None
    if "length" in meta:
        geometry = NozzleGeometry(
            length=meta["length"], inlet_radius=meta["inlet_radius"],
            outlet_radius=meta["outlet_radius"], throat_radius=meta["throat_radius"],
            throat_x=meta["throat_x"])
    gas = None
    if "gamma" in meta:
        gas = GasModel(gamma=meta["gamma"], inlet_density=meta["inlet_density"],
                       inlet_sound_speed=meta["inlet_sound_speed"])

    grid = ControlVolumeGrid(
        origin=np.array([meta["origin_x"], meta["origin_y"], meta["origin_z"]]),
        edge_length=meta["edge_length"], dims=dims,
        inside=np.zeros(m, dtype=bool), node_count=np.zeros(m, dtype=np.int64),
        v_target=np.full((m, 3), np.nan), p_target=np.full(m, np.nan),
        rho_target=np.full(m, np.nan), geometry=geometry, gas=gas)
    for r in rows:
        f = int(grid.ravel([[int(r[0]), int(r[1]), int(r[2])]])[0])
        grid.inside[f] = bool(int(r[6]))
        grid.node_count[f] = int(r[7])
        grid.v_target[f] = [float(r[8]), float(r[9]), float(r[10])]
        grid.p_target[f] = float(r[11])
    if gas is not None:
        occ = grid.node_count > 0
        grid.rho_target[occ] = gas.density_from_gauge(grid.p_target[occ])
    return grid
