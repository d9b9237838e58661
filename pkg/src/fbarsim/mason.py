"""1D Mason-model electrical admittance and through-thickness stress fields.

Sign and state conventions: the acoustic state is (stress T, particle
velocity v) with time dependence exp(j*omega*t); z runs from the bottom face
upward.  Propagating the state through a layer of thickness t uses

    [T, v](z + t) = [[cos g, j Z sin g], [j sin g / Z, cos g]] @ [T, v](z)

with g = omega * t / v_complex.  A free face has T = 0; a half-space of
impedance Z below the stack imposes T = Z v, above it T = -Z v.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from fbarsim.materials import Material, complex_impedance, complex_velocity, derive_acoustics
from fbarsim.stack import Layer, Stack

Z_CLAMP = 1e12


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class FrequencyGrid:
    f_start: float
    f_stop: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise SimulationError(f"grid needs at least 2 points, got {self.n_points}")
        if not 0 < self.f_start < self.f_stop:
            raise SimulationError(f"need 0 < f_start < f_stop, got {self.f_start}, {self.f_stop}")

    @property
    def frequencies(self) -> np.ndarray:
        return np.linspace(self.f_start, self.f_stop, self.n_points)

    @property
    def step(self) -> float:
        return (self.f_stop - self.f_start) / (self.n_points - 1)


DEFAULT_GRID = FrequencyGrid(5e9, 70e9, 6501)


@dataclass
class AdmittanceSpectrum:
    frequencies: np.ndarray
    y: np.ndarray
    provenance: str = "simulated"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.y = np.asarray(self.y, dtype=complex)
        if self.frequencies.ndim != 1 or self.frequencies.shape != self.y.shape:
            raise SimulationError("frequencies and admittance must be 1D arrays of equal length")
        if np.any(np.diff(self.frequencies) <= 0):
            raise SimulationError("frequencies must be strictly increasing")

    def __len__(self):
        return len(self.frequencies)

    @property
    def omega(self) -> np.ndarray:
        return 2 * np.pi * self.frequencies

    @property
    def z(self) -> np.ndarray:
        return 1 / self.y

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.y)

    def select(self, mask: np.ndarray) -> "AdmittanceSpectrum":
        return AdmittanceSpectrum(self.frequencies[mask], self.y[mask], self.provenance, dict(self.meta))


def _as_frequencies(grid: Union[FrequencyGrid, Sequence[float], np.ndarray, float]) -> np.ndarray:
    f = grid.frequencies if isinstance(grid, FrequencyGrid) else np.atleast_1d(np.asarray(grid, dtype=float))
    if np.any(f <= 0):
        raise SimulationError("frequency must be > 0")
    return f


def layer_matrix(layer: Layer, f, area: float = 1.0) -> np.ndarray:
    """Acoustic transfer matrix of one layer, shape ``f.shape + (2, 2)``.

    ``area`` scales the characteristic impedance so the state is
    (force, velocity); with the default of 1 it is (stress, velocity).
    """
    f = np.asarray(f, dtype=float)
    m = layer.material
    v = complex_velocity(m)
    z = complex_impedance(m) * area
    g = 2 * np.pi * f * layer.thickness / v
    c, s = np.cos(g), np.sin(g)
    out = np.empty(f.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = 1j * z * s
    out[..., 1, 0] = 1j * s / z
    out[..., 1, 1] = c
    return out


def _termination_impedance(term: Optional[Material], area: float) -> complex:
    return 0j if term is None else complex_impedance(term) * area


def _clamp(z: np.ndarray, limit: float) -> np.ndarray:
    mag = np.abs(z)
    over = ~np.isfinite(mag) | (mag > limit)
    if not np.any(over):
        return z
    z = np.array(z, dtype=complex)
    phase = np.where(np.isfinite(z[over]), np.angle(z[over]), np.pi / 2)
    z[over] = limit * np.exp(1j * phase)
    return z


def face_load(
    layers: Sequence[Layer],
    f,
    termination: Optional[Material] = None,
    area: float = 1.0,
    clamp: float = Z_CLAMP,
) -> np.ndarray:
    """Impedance seen from a piezo face looking outward.

    ``layers`` are ordered from the piezo face outward.  The result is capped
    at ``clamp`` times the impedance of the innermost layer so quarter-wave
    lossless loads stay finite.
    """
    f = np.asarray(f, dtype=float)
    zl = np.full(f.shape, _termination_impedance(termination, area), dtype=complex)
    for layer in reversed(list(layers)):
        t = layer_matrix(layer, f, area)
        num = t[..., 0, 0] * zl + t[..., 0, 1]
        den = t[..., 1, 0] * zl + t[..., 1, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            zl = num / den
        zl = _clamp(zl, clamp * abs(complex_impedance(layer.material)) * area)
    return zl


def piezo_input_impedance(omega, c0, kt2, x, z_top, z_bottom):
    """Electrical impedance of a thickness-excited piezo layer.

    ``x`` is the complex phase thickness omega*t/v, ``z_top``/``z_bottom`` the
    face loads normalised by the layer's own acoustic impedance.
    """
    zs = z_top + z_bottom
    num = zs * np.sin(x) + 2j * (1 - np.cos(x))
    den = zs * np.cos(x) + 1j * (1 + z_top * z_bottom) * np.sin(x)
    return (1 / (1j * omega * c0)) * (1 - (kt2 / x) * num / den)


@dataclass(frozen=True)
class _PiezoParams:
    c0: float
    kt2: complex
    velocity: complex
    impedance: complex
    h: float
    t: float


def _piezo_params(stack: Stack) -> _PiezoParams:
    layer = stack.piezo
    m = layer.material
    cd = derive_acoustics(m).complex_stiffness
    return _PiezoParams(
        c0=m.permittivity * stack.area / layer.thickness,
        kt2=m.e33**2 / (m.permittivity * cd),
        velocity=complex_velocity(m),
        impedance=complex_impedance(m),
        h=m.e33 / m.permittivity,
        t=layer.thickness,
    )


def static_capacitance(stack: Stack) -> float:
    return _piezo_params(stack).c0


def input_admittance(
    stack: Stack,
    grid: Union[FrequencyGrid, Sequence[float], np.ndarray] = DEFAULT_GRID,
    clamp: float = Z_CLAMP,
) -> AdmittanceSpectrum:
    f = _as_frequencies(grid)
    p = _piezo_params(stack)
    omega = 2 * np.pi * f
    x = omega * p.t / p.velocity
    zt = _clamp(face_load(stack.above, f, stack.top_termination, clamp=clamp) / p.impedance, clamp)
    zb = _clamp(face_load(stack.below, f, stack.bottom_termination, clamp=clamp) / p.impedance, clamp)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = 1 / piezo_input_impedance(omega, p.c0, p.kt2, x, zt, zb)
    return AdmittanceSpectrum(f, y, "simulated", {"stack": stack.name, "c0": p.c0})


# --- field solution -------------------------------------------------------


def _chain(layers: Sequence[Layer], f: np.ndarray) -> np.ndarray:
    out = np.broadcast_to(np.eye(2, dtype=complex), f.shape + (2, 2)).copy()
    for layer in layers:
        out = layer_matrix(layer, f) @ out
    return out


def _field_system(stack: Stack, f: np.ndarray):
    """Linear system rows for unknowns (a, D, V), per frequency.

    ``a`` is the particle velocity at the bottom outer face, ``D`` the
    electric displacement in the piezo layer and ``V`` the drive voltage.
    Returns (rows, pieces) where rows has shape f.shape + (2, 3).
    """
    p = _piezo_params(stack)
    omega = 2 * np.pi * f
    i = stack.piezo_index
    below = _chain(stack.layers[:i], f)
    piezo = layer_matrix(stack.piezo, f)
    above = _chain(stack.layers[i + 1 :], f)
    zb = _termination_impedance(stack.bottom_termination, 1.0)
    zt = _termination_impedance(stack.top_termination, 1.0)

    s0 = np.array([zb, 1.0], dtype=complex)
    s_pb_a = below @ s0  # state at piezo bottom per unit a
    hvec = np.array([p.h, 0.0], dtype=complex)
    s_pt_a = (piezo @ s_pb_a[..., None])[..., 0]
    s_pt_d = (piezo @ hvec) - hvec
    s_out_a = (above @ s_pt_a[..., None])[..., 0]
    s_out_d = (above @ s_pt_d[..., None])[..., 0]

    rows = np.zeros(f.shape + (2, 3), dtype=complex)
    # top face: T + zt * v = 0
    rows[..., 0, 0] = s_out_a[..., 0] + zt * s_out_a[..., 1]
    rows[..., 0, 1] = s_out_d[..., 0] + zt * s_out_d[..., 1]
    # voltage: -h (u_top - u_bottom) + D t / eps - V = 0
    du_a = (s_pt_a[..., 1] - s_pb_a[..., 1]) / (1j * omega)
    du_d = s_pt_d[..., 1] / (1j * omega)
    eps = stack.piezo.material.permittivity
    rows[..., 1, 0] = -p.h * du_a
    rows[..., 1, 1] = -p.h * du_d + p.t / eps
    rows[..., 1, 2] = -1.0
    return rows, (below, piezo, s0, hvec)


def _propagator(material: Material, thickness: np.ndarray, f: float) -> np.ndarray:
    """Per-area transfer matrices for a set of sub-thicknesses of one material."""
    v = complex_velocity(material)
    z = complex_impedance(material)
    g = 2 * np.pi * f * np.asarray(thickness) / v
    c, s = np.cos(g), np.sin(g)
    return np.stack([np.stack([c, 1j * z * s], -1), np.stack([1j * s / z, c], -1)], -2)


def field_admittance(stack: Stack, grid) -> AdmittanceSpectrum:
    """Admittance from the direct field solution (independent of the Mason closed form)."""
    f = _as_frequencies(grid)
    rows, _ = _field_system(stack, f)
    a_mat = rows[..., :2]
    rhs = -rows[..., 2]  # V = 1
    sol = np.linalg.solve(a_mat, rhs[..., None])[..., 0]
    d = sol[..., 1]
    y = 1j * 2 * np.pi * f * d * stack.area
    return AdmittanceSpectrum(f, y, "simulated", {"stack": stack.name, "method": "field"})


@dataclass
class StressProfile:
    positions: np.ndarray
    stress: np.ndarray
    velocity: np.ndarray
    frequency: float
    interfaces: list = field(default_factory=list)

    @property
    def total_thickness(self) -> float:
        return float(self.positions[-1])

    def aligned(self) -> np.ndarray:
        """Real stress after removing the common phase of the largest sample."""
        k = int(np.argmax(np.abs(self.stress)))
        return np.real(self.stress * np.exp(-1j * np.angle(self.stress[k])))

    def at(self, z: float) -> complex:
        return complex(np.interp(z, self.positions, self.stress.real) + 1j * np.interp(z, self.positions, self.stress.imag))


def stress_profile(stack: Stack, f: float, samples_per_layer: int = 64) -> StressProfile:
    """Stress and velocity through the stack at one frequency.

    The drive amplitude is the null vector of the boundary/voltage system, so
    the profile is defined at both series and parallel resonance.  The scale
    is arbitrary; the result is normalised to unit peak |stress|.
    """
    if not f > 0:
        raise SimulationError("frequency must be > 0")
    farr = np.array([float(f)])
    rows, (below, piezo_m, s0, hvec) = _field_system(stack, farr)
    _, _, vh = np.linalg.svd(rows[0])
    a, d, _v = np.conj(vh[-1])

    n = max(int(samples_per_layer), 2)
    positions, stresses, velocities = [], [], []
    state = s0 * a
    z0 = 0.0
    for layer in stack.layers:
        offset = hvec * d if layer.is_piezo_active else np.zeros(2, dtype=complex)
        start = state + offset
        local = np.linspace(0.0, layer.thickness, n)
        s = _propagator(layer.material, local, float(f)) @ start
        positions.append(z0 + local)
        stresses.append(s[:, 0] - offset[0])
        velocities.append(s[:, 1])
        state = s[-1] - offset
        z0 += layer.thickness
    pos = np.concatenate(positions)
    stress = np.concatenate(stresses)
    vel = np.concatenate(velocities)
    peak = np.max(np.abs(stress))
    if peak > 0:
        scale = np.exp(-1j * np.angle(stress[np.argmax(np.abs(stress))])) / peak
        stress = stress * scale
        vel = vel * scale
    return StressProfile(pos, stress, vel, float(f), stack.interfaces)
