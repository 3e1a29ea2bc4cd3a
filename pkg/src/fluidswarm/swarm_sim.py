"""Swarm simulation: agents flying fitted per-cell velocity commands.

Two start-up cases:

* ``tunnel_seeding``: every fitted cell up to an axial bound starts with its
  fitted agent count, all agents holding the cell's (scaled) command;
* ``reservoir``: the duct starts empty and batches of agents enter at the
  inlet disc at a fixed cadence, sized so the entry cell's fitted count and
  mean speed set the through-flow.

Per frame: agents are binned to cells, receive the cell's broadcast command
(every agent in a cell gets the identical command; cells without a fit use
the nearest fitted cell's command), step their velocity plants, move, then
optionally collide. Agents past the outlet retire; agents that drift through
the duct wall are logged once and keep flying. All randomness is drawn from
generators seeded by (seed, purpose, index), so traces are reproducible and
independent of thread count.

Collisions are classified from the pair kinematics: a same-direction closing
pair is an overtake (speed transfer from faster to slower); anti-parallel
pairs collide head-on and near-orthogonal pairs sideswipe, both dissipating a
fixed fraction of the pair's kinetic energy. Only speeds change, never
headings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .partition import ControlVolumeGrid, assign_cell
from .reference_field import _FMT
from .velocity_fit import GridFit
from .velocity_plant import PlantParams, PlantState, step as plant_step

CASES = ("tunnel_seeding", "reservoir")

FRAMES_HEADER = "frame,t,jx,jy,jz,n,ux,uy,uz,dev2,cdev2"
EVENTS_HEADER = "t,event,agent_a,agent_b,value"
TRAJ_HEADER = "t,agent,x,y,z,vx,vy,vz"


@dataclass(frozen=True)
class SimConfig:
    case: str = "reservoir"
    dt: float = 0.05
    duration: float = 60.0
    scale: float = 0.1                # command scaling applied at broadcast
    seed: int = 0
    collisions: bool = False
    collision_radius: float = 0.15    # agent body radius, m
    min_approach_speed: float = 0.5   # closing-speed floor to count a collision
    overtake_cos: float = 0.7         # heading alignment for one-way transfer
    headon_cos: float = math.cos(math.pi / 4)   # |alignment| split, 45 deg
    overtake_transfer: float = 0.25   # fraction of speed difference moved
    headon_dissipation: float = 0.10  # pair kinetic energy lost, head-on
    perp_dissipation: float = 0.20    # pair kinetic energy lost, sideswipe
    speed_limit: float = 30.0         # post-collision speed clamp, m/s
    dt_source: float = 0.5            # reservoir batch cadence, s
    batch_size: int | None = None     # None: sized from the entry cell's fit
    seed_x_max: float | None = None   # tunnel case axial fill bound; None: half
    record_trajectories: bool = False
    trajectory_stride: int = 10
    threads: int = 1                  # never affects results; kept for echo

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"case must be one of {CASES}")
        if self.dt <= 0 or self.duration <= 0 or self.scale <= 0:
            raise ValueError("dt, duration, scale must be positive")
        if self.dt_source < self.dt:
            raise ValueError("dt_source must be at least one frame")


@dataclass
class FrameRecord:
    """Per-cell sums for one frame; cells with no active agents are absent."""

    cells: np.ndarray       # (K,) flat indices, ascending
    counts: np.ndarray      # (K,) agents per cell
    vsum: np.ndarray        # (K, 3) velocity sums
    sumv2: np.ndarray       # (K,) sum of squared speeds
    dev2: np.ndarray        # (K,) sum ||v - v_target||^2 (NaN without a target)


@dataclass
class SimulationTrace:
    config: SimConfig
    plant: PlantParams
    dims: tuple[int, int, int]
    frame_t: np.ndarray
    frames: list[FrameRecord]
    events: list[tuple]               # (t, kind, agent_a, agent_b, value)
    command_table: np.ndarray         # (M, 3) broadcast commands
    injection_rate: float             # agents/s implied by the entry cell
    batch_size: int
    injected: int = 0
    retired: int = 0
    escaped: int = 0
    faults: int = 0
    trajectories: list[tuple] = field(default_factory=list)

    @property
    def agent_mass(self) -> float:
        return self.plant.mass


# ======================================================================
# command broadcast
# ======================================================================

def build_command_table(grid: ControlVolumeGrid, fit: GridFit,
                        scale: float) -> np.ndarray:
    """Scaled per-cell commands for the whole lattice.

    Fitted cells broadcast their own fitted mean; every other lattice cell
    borrows the command of the nearest fitted cell (ties to the lowest flat
    index), so an agent anywhere receives something sensible.
    """
    fitted = np.array(sorted(fit.results), dtype=np.int64)
    if len(fitted) == 0:
        raise ValueError("fit has no results")
    means = np.stack([fit.results[int(f)].command for f in fitted])
    centers = grid.centers()
    diff = centers[:, None, :] - centers[fitted][None, :, :]
    nearest = np.argmin(np.einsum("mfk,mfk->mf", diff, diff), axis=1)
    return scale * means[nearest]


def entry_cell(grid: ControlVolumeGrid, fit: GridFit) -> int:
    """Fitted cell nearest the inlet face center (ties to lowest index)."""
    fitted = np.array(sorted(fit.results), dtype=np.int64)
    target = grid.origin + np.array([grid.edge_length / 2.0, 0.0, 0.0])
    target[1:] = 0.0
    d = np.linalg.norm(grid.centers()[fitted] - target, axis=1)
    return int(fitted[np.argmin(d)])


def injection_rate(grid: ControlVolumeGrid, fit: GridFit) -> tuple[float, int]:
    """Agents/s through the inlet and the entry cell index.

    rate = N* * ||mean fitted velocity|| / edge_length for the entry cell.
    The unscaled fitted speed sets the rate (the reference through-flow);
    agents themselves fly the scaled command.
    """
    cell = entry_cell(grid, fit)
    res = fit.results[cell]
    rate = res.n_star * float(np.linalg.norm(res.command)) / grid.edge_length
    return rate, cell


# ======================================================================
# agent population
# ======================================================================

class _Population:
    """Growable agent arrays (positions, plant state, bookkeeping)."""

    def __init__(self):
        self.pos = np.empty((0, 3))
        self.vel = np.empty((0, 3))
        self.thr = np.empty((0, 3))
        self.active = np.empty(0, dtype=bool)
        self.escaped = np.empty(0, dtype=bool)

    def __len__(self) -> int:
        return len(self.pos)

    def append(self, pos, vel, thr) -> np.ndarray:
        start = len(self.pos)
        self.pos = np.vstack([self.pos, pos])
        self.vel = np.vstack([self.vel, vel])
        self.thr = np.vstack([self.thr, thr])
        n = len(pos)
        self.active = np.concatenate([self.active, np.ones(n, dtype=bool)])
        self.escaped = np.concatenate([self.escaped, np.zeros(n, dtype=bool)])
        return np.arange(start, start + n)


def seed_tunnel(grid: ControlVolumeGrid, fit: GridFit, config: SimConfig,
                plant: PlantParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Initial population for the tunnel case.

    Every fitted cell whose center lies at or below the axial bound gets its
    fitted agent count, positions uniform in the cell, velocity equal to the
    cell's scaled command, thrust at hover.
    """
    bound = config.seed_x_max
    if bound is None:
        length = grid.geometry.length if grid.geometry is not None \
            else grid.dims[0] * grid.edge_length
        bound = 0.5 * length
    centers = grid.centers()
    pos_list, vel_list = [], []
    for f in sorted(fit.results):
        if centers[f, 0] > bound:
            continue
        res = fit.results[f]
        rng = np.random.default_rng((config.seed, 2, int(f)))
        lo = grid.origin + grid.unravel([f])[0] * grid.edge_length
        pos = lo + rng.random((res.n_star, 3)) * grid.edge_length
        vel = np.tile(config.scale * res.command, (res.n_star, 1))
        pos_list.append(pos)
        vel_list.append(vel)
    if not pos_list:
        raise ValueError("no cells to seed below the axial bound")
    pos = np.vstack(pos_list)
    vel = np.vstack(vel_list)
    thr = np.zeros_like(vel)
    thr[:, 2] = -plant.gravity
    return pos, vel, thr


def make_batch(grid: ControlVolumeGrid, fit: GridFit, config: SimConfig,
               plant: PlantParams, batch_index: int, n_batch: int, cell: int):
    """One injection batch: uniform over the inlet disc, x in [0, edge)."""
    rng = np.random.default_rng((config.seed, 3, batch_index))
    radius = grid.geometry.radius(0.0) if grid.geometry is not None \
        else -grid.origin[1]
    rr = float(radius) * np.sqrt(rng.random(n_batch))
    th = 2.0 * np.pi * rng.random(n_batch)
    x = grid.origin[0] + rng.random(n_batch) * grid.edge_length
    pos = np.column_stack([x, rr * np.cos(th), rr * np.sin(th)])
    vel = np.tile(config.scale * fit.results[cell].command, (n_batch, 1))
    thr = np.zeros_like(vel)
    thr[:, 2] = -plant.gravity
    return pos, vel, thr


# ======================================================================
# collisions
# ======================================================================

def detect_collisions(pos, vel, config: SimConfig) -> list[tuple[int, int, str]]:
    """Classified colliding pairs among the given agents.

    Pairs closer than two body radii and closing faster than the approach
    floor are classified by heading alignment; grazing or separating pairs
    are ignored. Returned in ascending (a, b) index order.
    """
    if len(pos) < 2:
        return []
    pairs = cKDTree(pos).query_pairs(2.0 * config.collision_radius,
                                     output_type="ndarray")
    if len(pairs) == 0:
        return []
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    out = []
    for a, b in pairs:
        dx = pos[b] - pos[a]
        dist = np.linalg.norm(dx)
        if dist <= 1e-12:
            continue
        closing = float((vel[a] - vel[b]) @ (dx / dist))
        if closing <= config.min_approach_speed:
            continue
        sa, sb = np.linalg.norm(vel[a]), np.linalg.norm(vel[b])
        if sa < 1e-9 or sb < 1e-9:
            continue
        align = float(vel[a] @ vel[b]) / (sa * sb)
        if align > config.overtake_cos:
            kind = "overtake"
        elif abs(align) >= config.headon_cos:
            kind = "headon"
        else:
            kind = "sideswipe"
        out.append((int(a), int(b), kind))
    return out


def resolve_collisions(vel, pairs, config: SimConfig) -> list[tuple[int, int, str]]:
    """Apply speed changes in pair order; headings never change.

    Overtakes move a fraction of the speed difference from the faster to the
    slower agent (their speed sum is conserved); mutual collisions shrink
    both speeds by a common factor removing the configured share of the
    pair's kinetic energy. Speeds finally clamp to the configured limit.
    """
    applied = []
    for a, b, kind in pairs:
        sa, sb = np.linalg.norm(vel[a]), np.linalg.norm(vel[b])
        if sa < 1e-9 or sb < 1e-9:
            continue
        if kind == "overtake":
            fast, slow = (a, b) if sa >= sb else (b, a)
            sf, ss = max(sa, sb), min(sa, sb)
            delta = config.overtake_transfer * (sf - ss)
            vel[fast] *= (sf - delta) / sf
            vel[slow] *= (ss + delta) / ss
        else:
            f = config.headon_dissipation if kind == "headon" \
                else config.perp_dissipation
            keep = np.sqrt(1.0 - f)
            vel[a] *= keep
            vel[b] *= keep
        for i in (a, b):
            s = np.linalg.norm(vel[i])
            if s > config.speed_limit:
                vel[i] *= config.speed_limit / s
        applied.append((a, b, kind))
    return applied


# ======================================================================
# main loop
# ======================================================================

def run_simulation(grid: ControlVolumeGrid, fit: GridFit,
                   config: SimConfig | None = None,
                   plant: PlantParams | None = None) -> SimulationTrace:
    """Run one case end to end and return the full trace."""
    config = config or SimConfig()
    plant = plant or PlantParams()
    table = build_command_table(grid, fit, config.scale)
    length = grid.geometry.length if grid.geometry is not None \
        else grid.origin[0] + grid.dims[0] * grid.edge_length

    rate, cell0 = injection_rate(grid, fit)
    n_batch = config.batch_size if config.batch_size is not None \
        else max(1, int(round(rate * config.dt_source)))

    n_frames = int(round(config.duration / config.dt))
    trace = SimulationTrace(
        config=config, plant=plant, dims=grid.dims,
        frame_t=(np.arange(n_frames) + 1) * config.dt,
        frames=[], events=[], command_table=table,
        injection_rate=rate, batch_size=n_batch)

    pop = _Population()
    if config.case == "tunnel_seeding":
        pos, vel, thr = seed_tunnel(grid, fit, config, plant)
        ids = pop.append(pos, vel, thr)
        trace.injected += len(ids)
        for i in ids:
            trace.events.append((0.0, "inject", int(i), -1, 0.0))
    stride = max(1, int(round(config.dt_source / config.dt)))

    for k in range(n_frames):
        t = k * config.dt
        if config.case == "reservoir" and k % stride == 0:
            pos, vel, thr = make_batch(grid, fit, config, plant,
                                       k // stride, n_batch, cell0)
            ids = pop.append(pos, vel, thr)
            trace.injected += len(ids)
            for i in ids:
                trace.events.append((t, "inject", int(i), -1, 0.0))

        act = np.flatnonzero(pop.active)
        if len(act):
            flat = assign_cell(pop.pos[act], grid)
            cmds = table[flat]
            state = plant_step(PlantState(pop.vel[act], pop.thr[act]),
                               cmds, config.dt, plant)
            pop.vel[act] = state.velocity
            pop.thr[act] = state.thrust_accel
            pop.pos[act] += state.velocity * config.dt

            if config.collisions:
                sub_vel = pop.vel[act].copy()
                pairs = detect_collisions(pop.pos[act], sub_vel, config)
                applied = resolve_collisions(sub_vel, pairs, config)
                pop.vel[act] = sub_vel
                t_end = t + config.dt
                for a, b, kind in applied:
                    trace.events.append(
                        (t_end, f"collision_{kind}", int(act[a]), int(act[b]), 0.0))

            # wall escape: through the lateral wall, still inside the span
            if grid.geometry is not None:
                p = pop.pos[act]
                in_span = (p[:, 0] >= 0.0) & (p[:, 0] <= length)
                rad = grid.geometry.radius(np.clip(p[:, 0], 0.0, length))
                outside = in_span & (p[:, 1] ** 2 + p[:, 2] ** 2 > rad * rad) \
                    & ~pop.escaped[act]
                for i in act[outside]:
                    trace.events.append((t + config.dt, "wall_escape", int(i), -1, 0.0))
                pop.escaped[act[outside]] = True
                trace.escaped += int(outside.sum())

            # faults: non-finite state ends the agent's run
            bad = ~np.isfinite(pop.pos[act]).all(axis=1) \
                | ~np.isfinite(pop.vel[act]).all(axis=1)
            for i in act[bad]:
                trace.events.append((t + config.dt, "fault", int(i), -1, 0.0))
            pop.active[act[bad]] = False
            trace.faults += int(bad.sum())

            # retirement past the outlet plane
            act = np.flatnonzero(pop.active)
            gone = pop.pos[act, 0] > length
            for i in act[gone]:
                trace.events.append((t + config.dt, "retire", int(i), -1, 0.0))
            pop.active[act[gone]] = False
            trace.retired += int(gone.sum())

        trace.frames.append(_record_frame(pop, grid))
        if config.record_trajectories and k % config.trajectory_stride == 0:
            act = np.flatnonzero(pop.active)
            trace.trajectories.append(
                (t + config.dt, act.copy(), pop.pos[act].copy(), pop.vel[act].copy()))

    return trace


def _record_frame(pop: _Population, grid: ControlVolumeGrid) -> FrameRecord:
    act = np.flatnonzero(pop.active)
    if len(act) == 0:
        z = np.empty(0)
        return FrameRecord(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
                           np.empty((0, 3)), z, z.copy())
    flat = assign_cell(pop.pos[act], grid)
    order = np.argsort(flat, kind="stable")
    flat_s = flat[order]
    cells, start = np.unique(flat_s, return_index=True)
    counts = np.diff(np.append(start, len(flat_s))).astype(np.int64)
    vel = pop.vel[act][order]
    vsum = np.add.reduceat(vel, start, axis=0)
    sumv2 = np.add.reduceat(np.einsum("ij,ij->i", vel, vel), start)
    tgt = grid.v_target[flat_s]
    d = vel - tgt
    dev2 = np.add.reduceat(np.einsum("ij,ij->i", d, d), start)
    return FrameRecord(cells, counts, vsum, sumv2, dev2)


def population_balance(trace: SimulationTrace) -> dict:
    """Bookkeeping: injected = still-active + retired + faulted."""
    last = trace.frames[-1]
    active_now = int(last.counts.sum()) if len(last.counts) else 0
    return {"injected": trace.injected, "active": active_now,
            "retired": trace.retired, "faults": trace.faults,
            "balanced": trace.injected == active_now + trace.retired + trace.faults}


# ======================================================================
# run directory wire format
# ======================================================================

def save_run(trace: SimulationTrace, outdir) -> None:
    """Write config snapshot, per-frame cell records, events, trajectories."""
    import os
    os.makedirs(outdir, exist_ok=True)
    c, p = trace.config, trace.plant
    cfg_pairs = [
        ("case", c.case), ("dt", c.dt), ("duration", c.duration),
        ("scale", c.scale), ("seed", c.seed), ("collisions", int(c.collisions)),
        ("collision_radius", c.collision_radius),
        ("min_approach_speed", c.min_approach_speed),
        ("overtake_cos", c.overtake_cos), ("headon_cos", c.headon_cos),
        ("overtake_transfer", c.overtake_transfer),
        ("headon_dissipation", c.headon_dissipation),
        ("perp_dissipation", c.perp_dissipation),
        ("speed_limit", c.speed_limit), ("dt_source", c.dt_source),
        ("batch_size", trace.batch_size), ("threads", c.threads),
        ("agent_mass", p.mass), ("thrust_to_weight", p.thrust_to_weight),
        ("injection_rate", trace.injection_rate),
        ("injected", trace.injected), ("retired", trace.retired),
        ("escaped", trace.escaped), ("faults", trace.faults),
        ("nx", trace.dims[0]), ("ny", trace.dims[1]), ("nz", trace.dims[2]),
    ]
    with open(os.path.join(outdir, "config.txt"), "w", encoding="utf-8") as fh:
        for k, v in cfg_pairs:
            fh.write(f"{k}={v:.12g}\n" if isinstance(v, float) else f"{k}={v}\n")

    with open(os.path.join(outdir, "frames.csv"), "w", encoding="utf-8") as fh:
        fh.write(FRAMES_HEADER + "\n")
        for k, rec in enumerate(trace.frames):
            t = trace.frame_t[k]
            if len(rec.cells) == 0:
                continue
            trip = np.column_stack(np.unravel_index(rec.cells, trace.dims))
            mean_v = rec.vsum / rec.counts[:, None]
            cdev2 = rec.sumv2 - np.einsum("ij,ij->i", rec.vsum, rec.vsum) / rec.counts
            for i in range(len(rec.cells)):
                fh.write(",".join([
                    str(k), _FMT % t, str(trip[i, 0]), str(trip[i, 1]),
                    str(trip[i, 2]), str(int(rec.counts[i])),
                    _FMT % mean_v[i, 0], _FMT % mean_v[i, 1], _FMT % mean_v[i, 2],
                    _FMT % rec.dev2[i], _FMT % cdev2[i]]) + "\n")

    with open(os.path.join(outdir, "events.csv"), "w", encoding="utf-8") as fh:
        fh.write(EVENTS_HEADER + "\n")
        for t, kind, a, b, val in trace.events:
            fh.write(f"{t:.12g},{kind},{a},{b},{val:.12g}\n")

    if trace.trajectories:
        with open(os.path.join(outdir, "trajectories.csv"), "w", encoding="utf-8") as fh:
            fh.write(TRAJ_HEADER + "\n")
            for t, ids, pos, vel in trace.trajectories:
                for i in range(len(ids)):
                    fh.write(",".join(
                        [f"{t:.12g}", str(int(ids[i]))]
                        + [_FMT % x for x in pos[i]]
                        + [_FMT % x for x in vel[i]]) + "\n")


@dataclass
class LoadedRun:
    """Reduced trace reconstructed from a run directory (for analysis)."""

    config: dict
    frame_t: np.ndarray
    frames: list[FrameRecord]
    events: list[tuple]
    dims: tuple[int, int, int]


def load_run(rundir) -> LoadedRun:
    import os
    config: dict = {}
    with open(os.path.join(rundir, "config.txt"), "r", encoding="utf-8") as fh:
        for line in fh:
            k, _, v = line.strip().partition("=")
            try:
                config[k] = float(v) if "." in v or "e" in v or "inf" in v else int(v)
            except ValueError:
                config[k] = v
    dims = (int(config["nx"]), int(config["ny"]), int(config["nz"]))

    by_frame: dict[int, list] = {}
    times: dict[int, float] = {}
    with open(os.path.join(rundir, "frames.csv"), "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != FRAMES_HEADER:
            raise ValueError(f"frames.csv: unexpected header '{header}'")
        for line in fh:
            p = line.strip().split(",")
            k = int(p[0])
            times[k] = float(p[1])
            flat = int(np.ravel_multi_index((int(p[2]), int(p[3]), int(p[4])), dims))
            n = int(p[5])
            u = np.array([float(p[6]), float(p[7]), float(p[8])])
            dev2, p_int = float(p[9]), float(p[10])
            by_frame.setdefault(k, []).append((flat, n, u, dev2, p_int))

    n_frames = int(round(config["duration"] / config["dt"]))
    frame_t = (np.arange(n_frames) + 1) * config["dt"]
    frames = []
    for k in range(n_frames):
        rows = by_frame.get(k, [])
        if not rows:
            z = np.empty(0)
            frames.append(FrameRecord(np.empty(0, dtype=np.int64),
                                      np.empty(0, dtype=np.int64),
                                      np.empty((0, 3)), z, z.copy()))
            continue
        rows.sort(key=lambda r: r[0])
        cells = np.array([r[0] for r in rows], dtype=np.int64)
        counts = np.array([r[1] for r in rows], dtype=np.int64)
        vsum = np.stack([r[2] * r[1] for r in rows])
        dev2 = np.array([r[3] for r in rows])
        p_int = np.array([r[4] for r in rows])
        sumv2 = p_int + np.einsum("ij,ij->i", vsum, vsum) / counts
        frames.append(FrameRecord(cells, counts, vsum, sumv2, dev2))

    events = []
    ev_path = os.path.join(rundir, "events.csv")
    if os.path.exists(ev_path):
        with open(ev_path, "r", encoding="utf-8") as fh:
            fh.readline()
            for line in fh:
                p = line.strip().split(",")
                events.append((float(p[0]), p[1], int(p[2]), int(p[3]), float(p[4])))
    return LoadedRun(config=config, frame_t=frame_t, frames=frames,
                     events=events, dims=dims)
