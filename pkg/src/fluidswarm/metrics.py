"""Post-run analysis: time-averaged fields and agreement with the targets.

Frames after a transient window are averaged into per-cell fields. Averages
are conditional on occupancy: a cell contributes only for frames in which it
held at least one agent, and a cell that stays empty for the whole window is
excluded from every score. The occupied fraction is reported separately so
intermittent cells are still visible in exports.

Agreement is scored on normalized fields. Each side is scaled by its own
extremum before comparison: speeds by their max, target pressure by its most
negative value (suction peaks at 1 at the throat), measured deviation
pressure by its max, densities by their max. That makes the scores
insensitive to the command scale factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .partition import ControlVolumeGrid
from .primitives import ConstitutiveParams
from .reference_field import _FMT

SLICE_HEADER = ("x,y,z,occupancy,duty,concentration,ux,uy,uz,p_dev,p_int,T,"
                "tvx,tvy,tvz,tp,norm_speed,norm_tspeed,norm_p,norm_tp,"
                "norm_rho,norm_trho")
CENTERLINE_HEADER = ("x,target_speed,derived_speed,target_pressure,"
                     "derived_pressure,target_density,derived_density")


def _config_get(trace, key):
    cfg = trace.config
    return cfg[key] if isinstance(cfg, dict) else getattr(cfg, key)


def _agent_mass(trace) -> float:
    try:
        return float(trace.agent_mass)
    except AttributeError:
        return float(_config_get(trace, "agent_mass"))


# ======================================================================
# transient window
# ======================================================================

def transit_time_estimate(grid: ControlVolumeGrid, scale: float) -> float:
    """Axial traversal time at the scaled command speeds.

    Walks the axial slabs, takes the valid cells nearest the axis in each,
    and sums edge_length / (scale * mean target speed). Slabs with no valid
    cell (or zero speed) are crossed at the last known speed.
    """
    centers = grid.centers()
    slab = np.arange(grid.num_cells) // (grid.dims[1] * grid.dims[2])
    total = 0.0
    last_speed = None
    for jx in range(grid.dims[0]):
        idx = np.flatnonzero(grid.valid & (slab == jx))
        speed = None
        if len(idx):
            d = np.hypot(centers[idx, 1], centers[idx, 2])
            near = idx[d < d.min() + 1e-9]
            s = scale * float(np.mean(np.linalg.norm(grid.v_target[near], axis=1)))
            if s > 1e-12:
                speed = s
        if speed is None:
            speed = last_speed
        if speed is None:
            continue
        total += grid.edge_length / speed
        last_speed = speed
    return total


def default_transient(duration: float, transit: float) -> float:
    """Averaging starts after twice the transit estimate, capped at half the run."""
    return min(2.0 * transit, 0.5 * duration)


# ======================================================================
# time-averaged fields
# ======================================================================

@dataclass
class DerivedFields:
    """Per-cell time averages over the post-transient window.

    All per-agent statistics (occupancy, velocity, pressures, temperature)
    average only frames in which the cell was occupied; ``duty`` is the
    occupied fraction of the window.
    """

    occupancy: np.ndarray       # (M,) mean agent count over occupied frames
    duty: np.ndarray            # (M,) occupied fraction of post-transient frames
    concentration: np.ndarray   # (M,) occupancy / cell volume
    velocity: np.ndarray        # (M, 3) mean of per-frame mean velocities
    pressure_dev: np.ndarray    # (M,) from deviations off the cell target
    pressure_int: np.ndarray    # (M,) from deviations off the frame mean
    temperature: np.ndarray     # (M,) random + control composition
    occupied_frames: np.ndarray  # (M,) frames with at least one agent
    frames_used: int
    transient: float
    agent_mass: float

    @property
    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.velocity, axis=1)

    @property
    def valid(self) -> np.ndarray:
        return self.occupied_frames > 0


def derive_fields(trace, grid: ControlVolumeGrid,
                  transient: float | None = None,
                  params: ConstitutiveParams | None = None) -> DerivedFields:
    if transient is None:
        transit = transit_time_estimate(grid, _config_get(trace, "scale"))
        transient = default_transient(_config_get(trace, "duration"), transit)
    mass = _agent_mass(trace)
    params = params or ConstitutiveParams()
    coeff = 2.0 * mass / (3.0 * grid.cell_volume)

    M = grid.num_cells
    occ = np.zeros(M, dtype=np.int64)
    total = np.zeros(M)
    usum = np.zeros((M, 3))
    pdev_sum = np.zeros(M)
    pdev_frames = np.zeros(M, dtype=np.int64)
    pint_sum = np.zeros(M)
    temp_sum = np.zeros(M)

    used = 0
    for k in np.flatnonzero(trace.frame_t > transient):
        rec = trace.frames[k]
        used += 1
        if len(rec.cells) == 0:
            continue
        occ[rec.cells] += 1
        total[rec.cells] += rec.counts
        usum[rec.cells] += rec.vsum / rec.counts[:, None]
        cdev2 = rec.sumv2 - np.einsum("ij,ij->i", rec.vsum, rec.vsum) / rec.counts
        pint_sum[rec.cells] += coeff * cdev2
        # temperature: random part from in-cell spread, control part from
        # the instantaneous mass density
        t_rand = params.k_b * cdev2 / (2.0 * rec.counts)
        rho = mass * rec.counts / grid.cell_volume
        t_ctrl = params.control_weight * params.a_max * rho ** (-1.0 / 3.0) / params.c_v
        temp_sum[rec.cells] += t_rand + t_ctrl
        fin = np.isfinite(rec.dev2)
        pdev_sum[rec.cells[fin]] += coeff * rec.dev2[fin]
        pdev_frames[rec.cells[fin]] += 1
    if used == 0:
        raise ValueError("no frames after the transient window")

    with np.errstate(invalid="ignore", divide="ignore"):
        occupancy = total / occ
        velocity = usum / occ[:, None]
        p_dev = pdev_sum / pdev_frames
        p_int = pint_sum / occ
        temperature = temp_sum / occ
    return DerivedFields(
        occupancy=occupancy, duty=occ / used,
        concentration=occupancy / grid.cell_volume,
        velocity=velocity, pressure_dev=p_dev, pressure_int=p_int,
        temperature=temperature, occupied_frames=occ, frames_used=used,
        transient=transient, agent_mass=mass)


# ======================================================================
# agreement scores
# ======================================================================

def _norm_speed(derived: DerivedFields, grid, sel):
    ds = derived.speed[sel]
    ts = np.linalg.norm(grid.v_target[sel], axis=1)
    if ds.max() <= 0 or ts.max() <= 0:
        raise ValueError("zero velocity normalization constant")
    return derived.velocity[sel] / ds.max(), grid.v_target[sel] / ts.max()


def _norm_pressure(derived: DerivedFields, grid, sel):
    pd = derived.pressure_dev[sel]
    pt = grid.p_target[sel]
    if pd.max() <= 0 or pt.min() >= 0:
        raise ValueError("zero pressure normalization constant")
    return pd / pd.max(), pt / pt.min()


def _norm_density(derived: DerivedFields, grid, sel):
    da = derived.concentration[sel]
    tb = grid.rho_target[sel]
    if da.max() <= 0 or not np.isfinite(tb).all() or tb.max() <= 0:
        raise ValueError("zero density normalization constant")
    return da / da.max(), tb / tb.max()


def field_agreement(derived: DerivedFields, grid: ControlVolumeGrid) -> dict:
    """Normalized RMS differences between derived and target fields.

    Scored over valid cells only (targets present and occupied at least
    once). Density is reported in both conventions; they share one RMS value
    because (max - x)/max is an affine flip of x/max on both sides.
    """
    sel = grid.valid & derived.valid
    if not sel.any():
        raise ValueError("no cells to compare: every valid cell stayed empty")
    out = {"cells_compared": int(sel.sum())}

    a, b = _norm_speed(derived, grid, sel)
    out["rmse_velocity"] = float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))

    psel = sel & np.isfinite(derived.pressure_dev)
    a, b = _norm_pressure(derived, grid, psel)
    out["rmse_pressure"] = float(np.sqrt(np.mean((a - b) ** 2)))

    try:
        a, b = _norm_density(derived, grid, sel)
        out["rmse_density"] = float(np.sqrt(np.mean((a - b) ** 2)))
    except ValueError:
        out["rmse_density"] = float("nan")
    return out


def residual_table(derived: DerivedFields, grid: ControlVolumeGrid) -> dict:
    """Per-cell normalized residuals for the three scored quantities."""
    sel = grid.valid & derived.valid
    idx = np.flatnonzero(sel)
    a, b = _norm_speed(derived, grid, sel)
    table = {"cell": idx, "velocity": np.linalg.norm(a - b, axis=1)}
    pa, pb = _norm_pressure(derived, grid, sel)
    table["pressure"] = pa - pb
    try:
        da, db = _norm_density(derived, grid, sel)
        table["density"] = da - db
    except ValueError:
        table["density"] = np.full(len(idx), np.nan)
    return table


def trend_check(derived: DerivedFields, grid: ControlVolumeGrid,
                band: float = 2.0) -> dict:
    """Axial monotony: density dips at the throat, speed peaks there."""
    if grid.geometry is None:
        raise ValueError("trend check needs the duct geometry")
    geo = grid.geometry
    x = grid.centers()[:, 0]
    regions = {
        "inlet": x < band,
        "throat": np.abs(x - geo.throat_x) < band / 2.0,
        "exit": x > geo.length - band,
    }
    out = {}
    for name, mask in regions.items():
        m = mask & grid.valid & derived.valid
        if not m.any():
            raise ValueError(f"trend check inconclusive: no valid {name} cells")
        out[f"density_{name}"] = float(np.mean(derived.concentration[m]))
        out[f"speed_{name}"] = float(np.mean(derived.speed[m]))
    out["density_trend_ok"] = bool(
        out["density_inlet"] > out["density_throat"]
        and out["density_exit"] > out["density_throat"])
    out["speed_trend_ok"] = bool(
        out["speed_throat"] > out["speed_inlet"]
        and out["speed_throat"] > out["speed_exit"])
    return out


# ======================================================================
# centerline profiles
# ======================================================================

def centerline_profile(derived: DerivedFields, grid: ControlVolumeGrid) -> dict:
    """Axis-adjacent cell averages per axial slab, target and derived."""
    centers = grid.centers()
    slab = np.arange(grid.num_cells) // (grid.dims[1] * grid.dims[2])
    cols = {k: [] for k in ("x", "target_speed", "derived_speed",
                            "target_pressure", "derived_pressure",
                            "target_density", "derived_density")}
    for jx in range(grid.dims[0]):
        idx = np.flatnonzero(grid.valid & (slab == jx))
        if len(idx) == 0:
            continue
        d = np.hypot(centers[idx, 1], centers[idx, 2])
        near = idx[d < d.min() + 1e-9]
        cols["x"].append(float(np.mean(centers[near, 0])))
        cols["target_speed"].append(
            float(np.mean(np.linalg.norm(grid.v_target[near], axis=1))))
        cols["target_pressure"].append(float(np.mean(grid.p_target[near])))
        cols["target_density"].append(float(np.mean(grid.rho_target[near])))
        for key, vals in (("derived_speed", derived.speed[near]),
                          ("derived_pressure", derived.pressure_dev[near]),
                          ("derived_density",
                           np.where(derived.valid[near],
                                    derived.concentration[near], np.nan))):
            cols[key].append(float(np.nanmean(vals)) if np.isfinite(vals).any()
                             else float("nan"))
    return {k: np.array(v) for k, v in cols.items()}


def centerline_agreement(profile: dict) -> dict:
    """Normalized RMS gap between target and derived centerline curves."""
    out = {}
    ts, ds = profile["target_speed"], profile["derived_speed"]
    fin = np.isfinite(ds)
    if not fin.any() or np.max(ds[fin]) <= 0 or np.max(ts) <= 0:
        raise ValueError("zero velocity normalization constant")
    a = ds[fin] / np.max(ds[fin])
    b = ts[fin] / np.max(ts)
    out["centerline_speed_rms"] = float(np.sqrt(np.mean((a - b) ** 2)))

    tp, dp = profile["target_pressure"], profile["derived_pressure"]
    fin = np.isfinite(dp)
    if not fin.any() or np.max(dp[fin]) <= 0 or np.min(tp) >= 0:
        raise ValueError("zero pressure normalization constant")
    a = dp[fin] / np.max(dp[fin])
    b = tp[fin] / np.min(tp)
    out["centerline_pressure_rms"] = float(np.sqrt(np.mean((a - b) ** 2)))
    return out


# ======================================================================
# exports and the bundled report
# ======================================================================

def export_slice(derived: DerivedFields, grid: ControlVolumeGrid, path) -> None:
    """Vertical mid-plane cut: the single cell layer nearest y = 0.

    On grids with an even cell count across the axis the +y layer of the
    center pair is exported, so the cut is always exactly one layer.
    """
    centers = grid.centers()
    y_layers = centers.reshape(*grid.dims, 3)[0, :, 0, 1]
    # tie between the +/- center pair goes to the +y layer
    jy = int(np.argmin(np.abs(y_layers) - 1e-9 * np.sign(y_layers)))
    ds_max = np.nanmax(derived.speed[grid.valid & derived.valid])
    ts_all = np.linalg.norm(grid.v_target, axis=1)
    ts_max = np.nanmax(ts_all[grid.valid])
    pd = derived.pressure_dev
    pd_max = np.nanmax(pd[grid.valid & derived.valid & np.isfinite(pd)])
    pt_min = np.nanmin(grid.p_target[grid.valid])
    rho_max = np.nanmax(derived.concentration[grid.valid & derived.valid])
    trho_max = np.nanmax(grid.rho_target[grid.valid])

    flats = np.flatnonzero(grid.valid.reshape(grid.dims)[:, jy, :].ravel())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(SLICE_HEADER + "\n")
        for local in flats:
            jx, jz = divmod(int(local), grid.dims[2])
            f = int(np.ravel_multi_index((jx, jy, jz), grid.dims))
            row = ([centers[f, 0], centers[f, 1], centers[f, 2],
                    derived.occupancy[f], derived.duty[f],
                    derived.concentration[f]]
                   + list(derived.velocity[f])
                   + [derived.pressure_dev[f], derived.pressure_int[f],
                      derived.temperature[f]]
                   + list(grid.v_target[f]) + [grid.p_target[f]]
                   + [derived.speed[f] / ds_max, ts_all[f] / ts_max,
                      derived.pressure_dev[f] / pd_max,
                      grid.p_target[f] / pt_min,
                      derived.concentration[f] / rho_max,
                      grid.rho_target[f] / trho_max if np.isfinite(trho_max)
                      and trho_max > 0 else float("nan")])
            fh.write(",".join(_FMT % v for v in row) + "\n")


def export_centerline(profile: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CENTERLINE_HEADER + "\n")
        for i in range(len(profile["x"])):
            fh.write(",".join(_FMT % profile[k][i]
                              for k in ("x", "target_speed", "derived_speed",
                                        "target_pressure", "derived_pressure",
                                        "target_density", "derived_density"))
                     + "\n")


@dataclass
class MetricsReport:
    values: dict
    derived: DerivedFields
    profile: dict
    residuals: dict = field(default_factory=dict)


def metrics_report(trace, grid: ControlVolumeGrid,
                   transient: float | None = None) -> MetricsReport:
    """Everything at once: averages, agreement, trends, profiles, rates."""
    duration = float(_config_get(trace, "duration"))
    scale = float(_config_get(trace, "scale"))
    transit = transit_time_estimate(grid, scale)
    if transient is None:
        transient = default_transient(duration, transit)
    derived = derive_fields(trace, grid, transient)
    values = {
        "transit_estimate": transit,
        "transient": transient,
        "frames_used": derived.frames_used,
        "agent_mass": derived.agent_mass,
    }
    values.update(field_agreement(derived, grid))
    if grid.geometry is not None:
        try:
            values.update(trend_check(derived, grid))
        except ValueError as exc:
            values["trend_inconclusive"] = str(exc)
    profile = centerline_profile(derived, grid)
    values.update(centerline_agreement(profile))

    window = duration - transient
    # epsilon keeps the count stable across the 12-digit event time round trip
    eps = 1e-9
    retire = sum(1 for e in trace.events
                 if e[1] == "retire" and e[0] > transient + eps)
    inject = sum(1 for e in trace.events
                 if e[1] == "inject" and e[0] > transient + eps)
    values["exit_rate"] = retire / window if window > 0 else float("nan")
    values["inject_rate"] = inject / window if window > 0 else float("nan")
    for kind in ("overtake", "headon", "sideswipe"):
        values[f"collisions_{kind}"] = sum(
            1 for e in trace.events if e[1] == f"collision_{kind}")
    values["wall_escapes"] = sum(1 for e in trace.events if e[1] == "wall_escape")
    values["faults"] = sum(1 for e in trace.events if e[1] == "fault")
    last = trace.frames[-1]
    values["final_population"] = int(last.counts.sum()) if len(last.counts) else 0
    return MetricsReport(values=values, derived=derived, profile=profile,
                         residuals=residual_table(derived, grid))


def save_metrics(report: MetricsReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in report.values.items():
            if isinstance(v, bool):
                fh.write(f"{k}={int(v)}\n")
            elif isinstance(v, float):
                fh.write(f"{k}={v:.12g}\n")
            else:
                fh.write(f"{k}={v}\n")
