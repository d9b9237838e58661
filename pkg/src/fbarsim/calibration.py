"""Fit the piezo film constants to a reference resonance.

The bundled Sc0.3Al0.7N entry was produced by :func:`calibrate_piezo` with
the defaults below; ``tests/test_calibration.py`` re-runs it.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Mapping

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from fbarsim.materials import EPS0, Material
from fbarsim.mason import input_admittance
from fbarsim.modes import coupling, find_resonances
from fbarsim.stack import Stack, electrode_stack

TARGET_FS = 22.53e9
TARGET_K2 = 0.1239


def refine_extremum(stack: Stack, lo: float, hi: float, kind: str) -> float:
    """Frequency of max |Y| (``kind='fs'``) or min |Y| (``'fp'``) inside [lo, hi]."""
    sign = -1.0 if kind == "fs" else 1.0

    def objective(f):
        return sign * np.log(np.abs(input_admittance(stack, [f]).y[0]))

    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1.0})
    return float(res.x)


def refined_pairs(stack: Stack, f_start: float, f_stop: float, n_points: int = 2001) -> list[tuple[float, float]]:
    """Resonance pairs located on a grid and then polished by 1D optimisation."""
    grid = np.linspace(f_start, f_stop, n_points)
    step = grid[1] - grid[0]
    out = []
    for fs, fp in find_resonances(input_admittance(stack, grid)):
        out.append(
            (
                refine_extremum(stack, fs - 2 * step, fs + 2 * step, "fs"),
                refine_extremum(stack, fp - 2 * step, fp + 2 * step, "fp"),
            )
        )
    return out


def calibrate_piezo(
    catalog: Mapping[str, Material],
    target_fs: float = TARGET_FS,
    target_k2: float = TARGET_K2,
    piezo: str = "Sc0.3Al0.7N",
    electrode: str = "Al",
    start: tuple[float, float] = (2.7e11, 2.6),
) -> Material:
    """Solve c33 and e33 of ``piezo`` so the electrode/piezo/electrode
    template shows its first mode at ``target_fs`` with ``target_k2``.

    Density and permittivity are left untouched.
    """
    base = catalog[piezo]

    def build(p):
        m = replace(base, c33=p[0] * 1e11, e33=p[1])
        cat = dict(catalog)
        cat[piezo] = m
        return m, electrode_stack(cat, electrode, electrode, piezo=piezo)

    def residual(p):
        _, stack = build(p)
        f_guess = target_fs
        pairs = refined_pairs(stack, 0.4 * f_guess, 1.6 * f_guess)
        if not pairs:
            return [10.0, 10.0]
        fs, fp = pairs[0]
        return [(fs - target_fs) / target_fs * 100, (coupling(fs, fp) - target_k2) / target_k2 * 100]

    sol = least_squares(
        residual,
        [start[0] / 1e11, start[1]],
        bounds=([0.5, 0.1], [8.0, 8.0]),
        diff_step=1e-5,
        xtol=1e-12,
        ftol=1e-12,
    )
    m, _ = build(sol.x)
    return replace(m, c33=float(f"{m.c33:.5g}"), e33=float(f"{m.e33:.5g}"))


def _describe(m: Material) -> str:
    return f"{m.name} {m.density:g} {m.c33:.5g} {m.e33:.5g} {m.permittivity / EPS0:g} {m.mech_q:g}"


if __name__ == "__main__":
    from fbarsim.materials import default_catalog

    print(_describe(calibrate_piezo(default_catalog())))
