"""Resonance location, mode labelling, coupling, Q and figure of merit."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.signal import find_peaks

from fbarsim.mason import DEFAULT_GRID, AdmittanceSpectrum, FrequencyGrid, input_admittance, stress_profile
from fbarsim.stack import Stack

PROMINENCE_DB = 0.5
MAX_ORDER = 9
SYMMETRY_THRESHOLD = 0.95
NOISE_SIGMAS = 8.0

K2_DEFINITIONS = ("squared", "linear", "exact")


class ModeError(ValueError):
    pass


class ModeWarning(UserWarning):
    pass


@dataclass
class ModeReport:
    label: str
    fs: float
    fp: float
    k2: float
    q: Optional[float] = None
    q_source: Optional[str] = None

    def __post_init__(self):
        if not self.fs < self.fp:
            raise ModeError(f"{self.label}: need fs < fp, got {self.fs} >= {self.fp}")
        if not 0 <= self.k2 < 1:
            raise ModeError(f"{self.label}: k2 must be in [0, 1), got {self.k2}")
        if self.q is not None and not self.q > 0:
            raise ModeError(f"{self.label}: q must be > 0, got {self.q}")

    @property
    def fom(self) -> Optional[float]:
        return None if self.q is None else fom(self.k2, self.q)


def coupling(fs: float, fp: float, definition: str = "squared") -> float:
    """Effective coupling from a series/parallel resonance pair.

    ``squared``: (pi^2/8)(fp^2 - fs^2)/fp^2 (default)
    ``linear``:  (pi^2/4)(fp - fs)/fp
    ``exact``:   (pi fs / 2 fp) cot(pi fs / 2 fp), the free-plate relation
    """
    if not 0 < fs <= fp:
        raise ModeError(f"coupling needs 0 < fs <= fp, got fs={fs}, fp={fp}")
    if fs == fp:
        return 0.0
    r = fs / fp
    if definition == "squared":
        return math.pi**2 / 8 * (1 - r * r)
    if definition == "linear":
        return math.pi**2 / 4 * (1 - r)
    if definition == "exact":
        a = math.pi * r / 2
        return a / math.tan(a)
    raise ModeError(f"unknown k2 definition {definition!r}; choose from {K2_DEFINITIONS}")


def fom(k2: float, q: float) -> float:
    """Figure of merit k2*Q with k2 as a fraction."""
    return k2 * q


def _parabolic(f: np.ndarray, values: np.ndarray, i: int) -> float:
    if i <= 0 or i >= len(values) - 1:
        return float(f[i])
    y0, y1, y2 = values[i - 1 : i + 2]
    den = y0 - 2 * y1 + y2
    if not np.isfinite(den) or den == 0:
        return float(f[i])
    shift = 0.5 * (y0 - y2) / den
    shift = min(max(shift, -1.0), 1.0)
    lo, hi = (f[i - 1], f[i]) if shift < 0 else (f[i], f[i + 1])
    return float(f[i] + shift * (hi - lo))


def _local_c0(spec: AdmittanceSpectrum, fs: float, fp: float) -> float:
    f = spec.frequencies
    width = fp - fs
    side = ((f >= fs - 3 * width) & (f <= fs - width)) | ((f >= fp + width) & (f <= fp + 3 * width))
    c = spec.y.imag / spec.omega
    if np.count_nonzero(side) < 2:
        side = (f < fs - width) | (f > fp + width)
    if not np.any(side):
        return float(np.median(c))
    return float(np.median(c[side]))


def noise_level_db(level_db: np.ndarray) -> float:
    """Robust per-sample noise of a dB trace from its second differences."""
    d2 = np.diff(level_db, 2)
    d2 = d2[np.isfinite(d2)]
    if len(d2) == 0:
        return 0.0
    return float(np.median(np.abs(d2)) / 0.6745 / np.sqrt(6))


def find_resonances(
    spectrum: AdmittanceSpectrum,
    prominence_db: float = PROMINENCE_DB,
    c0: Optional[float] = None,
) -> list[tuple[float, float]]:
    """(fs, fp) pairs: |Y| maxima each followed by the next |Y| minimum.

    Extrema must have a topographic prominence of at least ``prominence_db``
    (raised to eight times the estimated sample noise for noisy data).
    A pair is kept when its peak |Y| stands ``prominence_db`` above the
    capacitive baseline omega*C0.  C0 is taken from ``c0``, else from the
    spectrum metadata (simulated spectra carry it), else estimated from
    Im(Y)/omega on both flanks of the pair.
    """
    if c0 is None:
        c0 = spectrum.meta.get("c0")
    if len(spectrum) < 16:
        raise ModeError(f"need at least 16 spectrum points, got {len(spectrum)}")
    f = spectrum.frequencies
    with np.errstate(divide="ignore"):
        level = 20 * np.log10(np.abs(spectrum.y))
    finite = np.where(np.isfinite(level), level, np.sign(level) * 1e300)
    threshold = max(prominence_db, NOISE_SIGMAS * noise_level_db(finite))
    peaks, _ = find_peaks(finite, prominence=threshold)
    dips, _ = find_peaks(-finite, prominence=threshold)
    pairs: list[tuple[float, float]] = []
    for k, i in enumerate(peaks):
        nxt = peaks[k + 1] if k + 1 < len(peaks) else len(f)
        after = dips[(dips > i) & (dips < nxt)]
        if len(after) == 0:
            continue
        j = after[0]
        fs = _parabolic(f, level, i)
        fp = _parabolic(f, -level, j)
        if not fs < fp:
            continue
        cap = c0 if c0 is not None else abs(_local_c0(spectrum, fs, fp))
        base = 2 * np.pi * fs * cap
        if base > 0 and 20 * np.log10(np.abs(spectrum.y[i]) / base) < prominence_db:
            continue
        pairs.append((fs, fp))
    return pairs


def q_bode(spectrum: AdmittanceSpectrum, f0: float, span: float = 0.02) -> float:
    """Q from the impedance phase slope, (f0/2)|dphi/df| at f0."""
    f = spectrum.frequencies
    if not f[0] <= f0 <= f[-1]:
        raise ModeError(f"f0 = {f0} outside the spectrum")
    local = np.nonzero(np.abs(f - f0) <= span * f0)[0]
    if len(local) < 5:
        raise ModeError(f"insufficient local points near {f0:.6g} Hz ({len(local)} < 5)")
    lo, hi = max(local[0] - 1, 0), min(local[-1] + 2, len(f))
    fw = f[lo:hi]
    raw = np.angle(1 / spectrum.y[lo:hi])
    if np.max(np.abs(np.diff(raw))) > np.pi / 2 or not np.all(np.isfinite(raw)):
        raise ModeError("insufficient damping: impedance phase jumps between samples")
    phase = np.unwrap(raw)
    slope = np.gradient(phase, fw)
    return float(f0 / 2 * abs(np.interp(f0, fw, slope)))


@dataclass
class ModeShape:
    order: int
    symmetry: float
    label: str
    ambiguous: bool


def _sign_changes(values: np.ndarray, tol: float = 1e-3) -> int:
    big = values[np.abs(values) > tol * np.max(np.abs(values))]
    if len(big) < 2:
        return 0
    s = np.sign(big)
    return int(np.count_nonzero(s[1:] != s[:-1]))


def mode_shape(stack: Stack, fs: float) -> ModeShape:
    """Harmonic order and mirror symmetry of the stress field at ``fs``.

    Symmetry is the normalised correlation of the signed (phase-aligned)
    stress with its reflection about the stack midplane: +1 for symmetric,
    -1 for antisymmetric fields.
    """
    prof = stress_profile(stack, fs)
    t = prof.aligned()
    order = min(_sign_changes(t) + 1, MAX_ORDER)
    z = np.linspace(0.0, prof.total_thickness, 2049)
    g = np.interp(z, prof.positions, t)
    corr = float(np.dot(g, g[::-1]) / np.dot(g, g))
    if corr >= SYMMETRY_THRESHOLD:
        kind, ambiguous = "S", False
    elif corr <= -SYMMETRY_THRESHOLD:
        kind, ambiguous = "A", False
    else:
        # asymmetric stack: fall back to the nominal parity of the order
        kind, ambiguous = ("S" if order % 2 else "A"), True
    return ModeShape(order, corr, f"{kind}{order}", ambiguous)


def classify_mode(stack: Stack, fs: float) -> str:
    shape = mode_shape(stack, fs)
    if shape.ambiguous:
        warnings.warn(
            f"mode at {fs / 1e9:.4g} GHz has ambiguous symmetry (correlation {shape.symmetry:.3f}); labelled {shape.label}",
            ModeWarning,
            stacklevel=2,
        )
    return shape.label


def analyze_modes(
    stack: Stack,
    grid: Union[FrequencyGrid, np.ndarray] = DEFAULT_GRID,
    definition: str = "squared",
    spectrum: Optional[AdmittanceSpectrum] = None,
) -> list[ModeReport]:
    """Simulate, locate resonance pairs, label them and attach Bode Q."""
    spec = spectrum if spectrum is not None else input_admittance(stack, grid)
    reports = []
    for fs, fp in find_resonances(spec):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ModeWarning)
            label = classify_mode(stack, fs)
        try:
            q = q_bode(spec, fs)
        except ModeError:
            q = None
        reports.append(ModeReport(label, fs, fp, coupling(fs, fp, definition), q, "bode" if q else None))
    return reports


def by_label(reports: list[ModeReport]) -> dict[str, ModeReport]:
    """First report for each label."""
    out: dict[str, ModeReport] = {}
    for r in reports:
        out.setdefault(r.label, r)
    return out
