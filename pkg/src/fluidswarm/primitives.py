"""Kinetic-theory style bulk observables for a set of agents in one cell.

A group of agents occupying a control volume is summarized the way a gas
parcel would be: a drift-projected bulk velocity, a mass (or count) density,
a pressure built from the second velocity moment, and a temperature split
into a thermal part (velocity spread about the mass-mean) plus a control
part tied to actuation authority. A barotropic closure and a dispersion-
corrected sound speed round out the set.

All moment routines take agent masses and velocities as arrays; empty cells
raise :class:`UndefinedSampleError` rather than returning zeros, because an
unoccupied cell has no defined bulk state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UndefinedSampleError(ValueError):
    """Bulk observables are undefined for an empty cell."""


class DegenerateCellError(ValueError):
    """Raised when a closure needs a positive density and gets none."""


@dataclass(frozen=True)
class ConstitutiveParams:
    """Closure constants for temperature, sound speed, and actuation.

    ``a_max`` is the peak commanded acceleration the platform can deliver
    (thrust-to-weight times gravity for a multirotor).
    """

    c_v: float = 1.0          # specific heat at constant volume analog
    c_p: float = 1.4          # specific heat at constant pressure analog
    k_b: float = 1.0          # velocity-spread-to-temperature conversion
    control_weight: float = 0.5   # weight of the control energy term
    response_time: float = 0.08   # actuation response time, s
    command_rate: float = 0.0     # command update angular rate, rad/s
    a_max: float = 2.2 * 9.81     # peak commanded acceleration, m/s^2

    @property
    def gas_constant(self) -> float:
        return self.c_p - self.c_v

    @property
    def gamma(self) -> float:
        return self.c_p / self.c_v


def _check(masses, velocities):
    m = np.asarray(masses, dtype=float).reshape(-1)
    v = np.asarray(velocities, dtype=float).reshape(-1, 3)
    if len(m) == 0:
        raise UndefinedSampleError("no agents in cell")
    if len(m) != len(v):
        raise ValueError("masses and velocities must have equal length")
    if np.any(m <= 0):
        raise ValueError("agent masses must be positive")
    return m, v


def swarm_velocity(masses, velocities, drift_direction) -> np.ndarray:
    """Mass-weighted mean velocity projected onto the drift direction.

    The bulk velocity keeps only motion along the intended drift axis;
    transverse agitation belongs to pressure/temperature, not drift.
    """
    m, v = _check(masses, velocities)
    d = np.asarray(drift_direction, dtype=float)
    norm = np.linalg.norm(d)
    if norm == 0:
        raise ValueError("drift_direction must be nonzero")
    d = d / norm
    return (m @ (v @ d)) / m.sum() * d


def swarm_density(masses, cell_volume: float) -> float:
    """Mass density: total agent mass per cell volume."""
    m = np.asarray(masses, dtype=float).reshape(-1)
    if len(m) == 0:
        raise UndefinedSampleError("no agents in cell")
    if cell_volume <= 0:
        raise ValueError("cell_volume must be positive")
    return float(m.sum() / cell_volume)


def number_density(count: int, cell_volume: float) -> float:
    """Agent concentration: count per cell volume."""
    if cell_volume <= 0:
        raise ValueError("cell_volume must be positive")
    return count / cell_volume


def stress_diagonal(masses, velocities, cell_volume: float) -> np.ndarray:
    """Diagonal of the kinetic stress tensor, one entry per axis.

    P_aa = (2 / dV) * sum_i m_i v_{a,i}^2.
    """
    m, v = _check(masses, velocities)
    return 2.0 / cell_volume * (m @ (v * v))


def swarm_pressure(masses, velocities, cell_volume: float) -> float:
    """Scalar pressure: one third of the stress trace.

    P = (2 / (3 dV)) * sum_i m_i ||v_i||^2.
    """
    m, v = _check(masses, velocities)
    return float(2.0 / (3.0 * cell_volume) * (m @ np.einsum("ij,ij->i", v, v)))


def swarm_pressure_moment_form(masses, velocities, cell_volume: float) -> float:
    """Same pressure via density times the mass-weighted mean square speed.

    P = (2/3) * rho * <||v||^2>. Kept as an independent route for
    cross-checking the direct sum; the two agree to rounding.
    """
    m, v = _check(masses, velocities)
    rho = m.sum() / cell_volume
    mean_sq = (m @ np.einsum("ij,ij->i", v, v)) / m.sum()
    return float(2.0 / 3.0 * rho * mean_sq)


def internal_pressure(masses, velocities, cell_volume: float, bulk_velocity) -> float:
    """Pressure of the velocity fluctuations about a given bulk velocity.

    P_int = (2 / (3 dV)) * sum_i m_i ||v_i - u||^2. With u the mass-mean
    velocity this is the translation-invariant part of the pressure.
    """
    m, v = _check(masses, velocities)
    w = v - np.asarray(bulk_velocity, dtype=float)
    return float(2.0 / (3.0 * cell_volume) * (m @ np.einsum("ij,ij->i", w, w)))


def mass_mean_velocity(masses, velocities) -> np.ndarray:
    """Unprojected mass-weighted mean velocity."""
    m, v = _check(masses, velocities)
    return (m[:, None] * v).sum(axis=0) / m.sum()


def random_temperature(masses, velocities, params: ConstitutiveParams) -> float:
    """Thermal temperature from the velocity spread about the mass mean.

    T_rand = k_b * sum_i m_i ||v_i - U||^2 / (2 * sum_i m_i).
    """
    m, v = _check(masses, velocities)
    w = v - mass_mean_velocity(m, v)
    return float(params.k_b * (m @ np.einsum("ij,ij->i", w, w)) / (2.0 * m.sum()))


def control_temperature(rho: float, params: ConstitutiveParams) -> float:
    """Control temperature from actuation authority over the packing length.

    T_ctrl = (control_weight / c_v) * a_max * L with L = rho^(-1/3).
    An empty cell (rho = 0) has no packing length; that is a degenerate cell.
    """
    if rho <= 0:
        raise DegenerateCellError("control temperature needs a positive density")
    length_scale = rho ** (-1.0 / 3.0)
    return params.control_weight * params.a_max * length_scale / params.c_v


def swarm_temperature(masses, velocities, cell_volume: float,
                      params: ConstitutiveParams) -> float:
    """Total temperature: thermal part plus control part."""
    t_rand = random_temperature(masses, velocities, params)
    rho = swarm_density(masses, cell_volume)
    return t_rand + control_temperature(rho, params)


def speed_of_sound(temperature: float, params: ConstitutiveParams) -> float:
    """Dispersion-corrected acoustic speed.

    c^2 = gamma * R * T / (1 + (omega * tau)^2), with omega the command
    update rate and tau the actuation response time; omega = 0 recovers the
    ideal-gas form.
    """
    if temperature < 0:
        raise ValueError("temperature must be nonnegative")
    disp = 1.0 + (params.command_rate * params.response_time) ** 2
    return float(np.sqrt(params.gamma * params.gas_constant * temperature / disp))


def barotropic_pressure(rho: float, reference_rho: float, reference_p: float,
                        gamma: float) -> float:
    """Isentropic closure P = k * rho^gamma anchored at a reference state."""
    if rho < 0 or reference_rho <= 0 or reference_p <= 0:
        raise ValueError("densities and reference pressure must be positive")
    k = reference_p / reference_rho ** gamma
    return float(k * rho ** gamma)


@dataclass(frozen=True)
class SwarmFieldSample:
    """The full bulk-state record for one cell at one instant."""

    count: int
    bulk_velocity: np.ndarray      # drift-projected
    mean_velocity: np.ndarray      # unprojected mass mean
    mass_density: float
    concentration: float
    pressure: float
    pressure_internal: float
    temperature: float


def compute_sample(masses, velocities, cell_volume: float, drift_direction,
                   params: ConstitutiveParams | None = None) -> SwarmFieldSample:
    """Evaluate every bulk observable for one cell's agents."""
    params = params or ConstitutiveParams()
    m, v = _check(masses, velocities)
    mean_v = mass_mean_velocity(m, v)
    return SwarmFieldSample(
        count=len(m),
        bulk_velocity=swarm_velocity(m, v, drift_direction),
        mean_velocity=mean_v,
        mass_density=swarm_density(m, cell_volume),
        concentration=number_density(len(m), cell_volume),
        pressure=swarm_pressure(m, v, cell_volume),
        pressure_internal=internal_pressure(m, v, cell_volume, mean_v),
        temperature=swarm_temperature(m, v, cell_volume, params),
    )
