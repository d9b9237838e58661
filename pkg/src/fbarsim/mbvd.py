"""Modified Butterworth-Van Dyke circuit: evaluation and two-stage fitting.

Topology: Rs and Ls in series with a core made of (R0 + C0) in parallel
with one Rm-Lm-Cm branch per mode.

Fitting follows the usual extraction order.  The electromagnetic part (Rs,
Ls, C0, R0) is fitted first on off-resonance points with no motional
branches; then each branch is fitted inside its own window with the EM part
frozen; a final joint polish refines everything.  All residuals are complex
admittance errors weighted by 1/|Y_measured|.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy.optimize import least_squares

from fbarsim.mason import AdmittanceSpectrum
from fbarsim.modes import coupling, find_resonances

Q_SEED = 50.0
EM_EXCLUSION = 3.0
WINDOW_FACTOR = 5.0
EM_MAX_ITER = 200
POLISH_MAX_ITER = 100
STEP_TOL = 1e-8


class FitError(RuntimeError):
    pass


class FitWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MotionalBranch:
    rm: float
    lm: float
    cm: float

    def __post_init__(self):
        if self.rm < 0 or not self.lm > 0 or not self.cm > 0:
            raise ValueError(f"invalid branch rm={self.rm}, lm={self.lm}, cm={self.cm}")

    @property
    def fs(self) -> float:
        return 1 / (2 * math.pi * math.sqrt(self.lm * self.cm))

    @property
    def q(self) -> float:
        return math.inf if self.rm == 0 else 2 * math.pi * self.fs * self.lm / self.rm

    @classmethod
    def from_resonance(cls, fs: float, q: float, cm: float) -> "MotionalBranch":
        lm = 1 / ((2 * math.pi * fs) ** 2 * cm)
        return cls(2 * math.pi * fs * lm / q, lm, cm)


@dataclass(frozen=True)
class MbvdModel:
    rs: float
    ls: float
    c0: float
    r0: float = 0.0
    branches: tuple[MotionalBranch, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if self.rs < 0 or self.ls < 0 or self.r0 < 0:
            raise ValueError("rs, ls and r0 must be >= 0")
        if not self.c0 > 0:
            raise ValueError("c0 must be > 0")
        fs = [b.fs for b in self.branches]
        if any(b <= a for a, b in zip(fs, fs[1:])):
            raise ValueError("branch resonance frequencies must be strictly increasing")


class EmParams(NamedTuple):
    rs: float
    ls: float
    c0: float
    r0: float


class BranchMetrics(NamedTuple):
    fs: float
    q: float
    k2: float


@dataclass
class StageLog:
    stage: str
    iterations: int
    converged: bool
    message: str = ""


@dataclass
class FitResult:
    model: MbvdModel
    residual: float
    stage_log: list[StageLog] = field(default_factory=list)
    metrics: list[BranchMetrics] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(s.converged for s in self.stage_log)


def _core_and_series(omega, rs, ls, c0, r0, branches):
    # every reciprocal in real arithmetic: 1/(a + jb) = (a - jb)/(a^2 + b^2)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = -1 / (omega * c0)
        d = r0 * r0 + x * x
        g, b = r0 / d, -x / d
        for rm, lm, cm in branches:
            x = omega * lm - 1 / (omega * cm)
            d = rm * rm + x * x
            g = g + rm / d
            b = b - x / d
        d = g * g + b * b
        r = rs + g / d
        x = omega * ls - b / d
        d = r * r + x * x
        return (r - 1j * x) / d


def evaluate(model: MbvdModel, frequencies) -> AdmittanceSpectrum:
    f = np.atleast_1d(np.asarray(frequencies, dtype=float))
    if np.any(f <= 0):
        raise ValueError("frequency must be > 0")
    branches = [(b.rm, b.lm, b.cm) for b in model.branches]
    y = _core_and_series(2 * np.pi * f, model.rs, model.ls, model.c0, model.r0, branches)
    return AdmittanceSpectrum(f, y, "simulated", {"c0": model.c0})


def derive_metrics(model: MbvdModel) -> list[BranchMetrics]:
    if not model.branches:
        raise ValueError("model has no motional branches")
    return [BranchMetrics(b.fs, b.q, math.pi**2 / 8 * b.cm / (model.c0 + b.cm)) for b in model.branches]


# --- windows and seeds ----------------------------------------------------


def resonance_windows(pairs: Sequence[tuple[float, float]], factor: float = WINDOW_FACTOR) -> list[tuple[float, float]]:
    """[fs - factor*(fp-fs), fp + factor*(fp-fs)] for each pair."""
    return [(fs - factor * (fp - fs), fp + factor * (fp - fs)) for fs, fp in pairs]


def _in_windows(f: np.ndarray, windows: Sequence[tuple[float, float]]) -> np.ndarray:
    mask = np.zeros(f.shape, dtype=bool)
    for lo, hi in windows:
        mask |= (f >= lo) & (f <= hi)
    return mask


def initial_guess(spectrum: AdmittanceSpectrum, q0: float = Q_SEED, pairs=None) -> MbvdModel:
    """Seed model: C0 from the low band, Rs from the Re(Z) floor, one branch per pair."""
    f, y = spectrum.frequencies, spectrum.y
    low = f <= min(2 * f[0], f[0] + 0.1 * (f[-1] - f[0]))
    if np.count_nonzero(low) < 3:
        low = np.arange(len(f)) < max(3, len(f) // 10)
    cap = np.median(y[low].imag / spectrum.omega[low])
    if not cap > 0:
        raise FitError("cannot seed C0: low band is not capacitive")
    high = f >= f[-1] - 0.1 * (f[-1] - f[0])
    rs = max(float(np.min((1 / y[high]).real)), 0.0)
    if pairs is None:
        pairs = find_resonances(spectrum)
    branches = []
    for fs, fp in pairs:
        cm = cap * (fp**2 - fs**2) / fs**2
        branches.append(MotionalBranch.from_resonance(fs, q0, cm))
    return MbvdModel(rs, 0.0, float(cap), 0.0, tuple(branches))


# --- least squares plumbing -----------------------------------------------


def _weighted_residual(y_model, y_meas, weight):
    d = (y_model - y_meas) * weight
    return np.concatenate([d.real, d.imag])


def _rms(y_model, y_meas, weight) -> float:
    return float(np.sqrt(np.mean(np.abs((y_model - y_meas) * weight) ** 2)))


def _solve(fun, x0, lower, upper, max_iter, xtol=STEP_TOL):
    x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)
    res = least_squares(
        fun,
        x0,
        bounds=(lower, upper),
        method="trf",
        xtol=xtol,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=max_iter,
        x_scale="jac",
    )
    return res


def _log(log, stage, res):
    if log is not None:
        log.append(StageLog(stage, int(res.nfev), bool(res.status > 0), str(res.message)))


def fit_em(
    spectrum: AdmittanceSpectrum,
    resonance_windows: Sequence[tuple[float, float]] = (),
    seed: Optional[MbvdModel] = None,
    fit_r0: bool = False,
    log: Optional[list] = None,
) -> EmParams:
    """Fit (rs, ls, c0, r0) on the points outside ``resonance_windows``.

    Off resonance R0 adds to Rs indistinguishably, so it is held at the seed
    value (default 0) unless ``fit_r0`` is set.
    """
    keep = ~_in_windows(spectrum.frequencies, resonance_windows)
    if np.count_nonzero(keep) < 20:
        raise FitError(f"too few off-resonance points for the EM fit ({np.count_nonzero(keep)} < 20)")
    omega = spectrum.omega[keep]
    y = spectrum.y[keep]
    w = 1 / np.abs(y)
    if seed is None:
        seed = initial_guess(spectrum, pairs=[])
    c0s = seed.c0

    def model(x):
        r0 = x[3] if fit_r0 else seed.r0
        return _core_and_series(omega, x[0], x[1] * 1e-12, x[2] * c0s, r0, [])

    def fun(x):
        return _weighted_residual(model(x), y, w)

    x0 = [seed.rs, seed.ls * 1e12, 1.0, seed.r0]
    lower = [0.0, 0.0, 1e-3, 0.0]
    upper = [np.inf, np.inf, 1e3, np.inf]
    n = 4 if fit_r0 else 3
    res = _solve(fun, x0[:n], lower[:n], upper[:n], EM_MAX_ITER)
    _log(log, "em", res)
    if res.status <= 0:
        warnings.warn(f"EM fit did not converge: {res.message}", FitWarning, stacklevel=2)
    x = res.x
    return EmParams(float(x[0]), float(x[1] * 1e-12), float(x[2] * c0s), float(x[3] if fit_r0 else seed.r0))


def _branch_tuple(b: MotionalBranch):
    return (b.rm, b.lm, b.cm)


def _branch_params(b: MotionalBranch):
    return b.fs, b.q, b.cm


def fit_branches(
    spectrum: AdmittanceSpectrum,
    em_params: EmParams,
    windows: Sequence[tuple[float, float]],
    seeds: Optional[Sequence[MotionalBranch]] = None,
    q0: float = Q_SEED,
    polish: bool = False,
    log: Optional[list] = None,
) -> list[MotionalBranch]:
    """Fit one motional branch per window with the EM parameters frozen.

    Without ``seeds`` each window is seeded from its strongest |Y| peak.
    With ``polish`` the joint refinement of :func:`polish_model` runs last and
    its branches are returned (use :func:`fit_mbvd` to keep its EM values).
    """
    if not windows:
        return []
    f = spectrum.frequencies
    rs, ls, c0, r0 = em_params
    if seeds is None:
        seeds = []
        for lo, hi in windows:
            sub = spectrum.select((f >= lo) & (f <= hi))
            pairs = find_resonances(sub, c0=c0) if len(sub) >= 16 else []
            if not pairs:
                seeds.append(None)
                continue
            fs, fp = max(pairs, key=lambda p: np.abs(np.interp(p[0], sub.frequencies, np.abs(sub.y))))
            seeds.append(MotionalBranch.from_resonance(fs, q0, c0 * (fp**2 - fs**2) / fs**2))
    current = list(seeds)
    for k, (lo, hi) in enumerate(windows):
        if current[k] is None:
            warnings.warn(f"window {lo / 1e9:.4g}-{hi / 1e9:.4g} GHz has no resonance; branch skipped", FitWarning, stacklevel=2)
            continue
        mask = (f >= lo) & (f <= hi)
        omega, y = spectrum.omega[mask], spectrum.y[mask]
        w = 1 / np.abs(y)
        fs0, qs0, cm0 = _branch_params(current[k])
        others = [_branch_tuple(b) for j, b in enumerate(current) if j != k and b is not None]

        def branch(x, fs0=fs0, qs0=qs0, cm0=cm0):
            return MotionalBranch.from_resonance(x[0] * fs0, x[1] * qs0, x[2] * cm0)

        def fun(x, omega=omega, y=y, w=w, others=others, branch=branch):
            b = branch(x)
            return _weighted_residual(_core_and_series(omega, rs, ls, c0, r0, others + [_branch_tuple(b)]), y, w)

        res = _solve(fun, [1.0, 1.0, 1.0], [0.5, 1e-3, 1e-4], [2.0, 1e3, 1e4], EM_MAX_ITER, xtol=1e-10)
        _log(log, f"branch{k + 1}", res)
        current[k] = branch(res.x)
    fitted = [b for b in current if b is not None]
    fitted.sort(key=lambda b: b.fs)
    if polish and fitted:
        model = polish_model(spectrum, MbvdModel(rs, ls, c0, r0, tuple(fitted)), log=log)
        return list(model.branches)
    return fitted


def polish_model(
    spectrum: AdmittanceSpectrum,
    model: MbvdModel,
    max_iter: int = POLISH_MAX_ITER,
    log: Optional[list] = None,
) -> MbvdModel:
    """Joint refinement of every parameter over the whole spectrum."""
    omega, y = spectrum.omega, spectrum.y
    w = 1 / np.abs(y)
    base = [_branch_params(b) for b in model.branches]
    c0s = model.c0
    rscale = max(model.rs + model.r0, 1e-3)

    def unpack(x):
        rs, ls, c0, r0 = x[0] * rscale, x[1] * 1e-12, x[2] * c0s, x[3] * rscale
        branches = [
            MotionalBranch.from_resonance(x[4 + 3 * i] * fs, x[5 + 3 * i] * q, x[6 + 3 * i] * cm)
            for i, (fs, q, cm) in enumerate(base)
        ]
        return rs, ls, c0, r0, branches

    def fun(x):
        rs, ls, c0, r0, branches = unpack(x)
        return _weighted_residual(_core_and_series(omega, rs, ls, c0, r0, [_branch_tuple(b) for b in branches]), y, w)

    n = len(base)
    x0 = [model.rs / rscale, model.ls * 1e12, 1.0, model.r0 / rscale] + [1.0] * (3 * n)
    lower = [0.0, 0.0, 0.5, 0.0] + [0.8, 0.05, 0.05] * n
    upper = [np.inf, np.inf, 2.0, np.inf] + [1.25, 20.0, 20.0] * n
    res = _solve(fun, x0, lower, upper, max_iter, xtol=1e-12)
    _log(log, "polish", res)
    rs, ls, c0, r0, branches = unpack(res.x)
    branches.sort(key=lambda b: b.fs)
    return MbvdModel(rs, ls, c0, r0, tuple(branches))


def fit_mbvd(
    spectrum: AdmittanceSpectrum,
    pairs: Optional[Sequence[tuple[float, float]]] = None,
    window_factor: float = WINDOW_FACTOR,
    q0: float = Q_SEED,
    polish: bool = True,
) -> FitResult:
    """Full extraction: resonances, EM stage, branch stage, joint polish."""
    if pairs is None:
        pairs = find_resonances(spectrum)
    log: list[StageLog] = []
    seed = initial_guess(spectrum, q0, pairs=pairs)
    em = fit_em(spectrum, resonance_windows(pairs, EM_EXCLUSION), seed=seed, log=log)
    windows = _separate(resonance_windows(pairs, window_factor), pairs)
    seeds = [MotionalBranch.from_resonance(fs, q0, em.c0 * (fp**2 - fs**2) / fs**2) for fs, fp in pairs]
    branches = fit_branches(spectrum, em, windows, seeds=seeds, q0=q0, log=log)
    model = MbvdModel(em.rs, em.ls, em.c0, em.r0, tuple(branches))
    if polish and branches:
        model = polish_model(spectrum, model, log=log)
    y_fit = evaluate(model, spectrum.frequencies).y
    residual = _rms(y_fit, spectrum.y, 1 / np.abs(spectrum.y))
    metrics = derive_metrics(model) if model.branches else []
    return FitResult(model, residual, log, metrics)


def _separate(windows, pairs):
    """Trim neighbouring windows so they stop halfway between resonances."""
    out = [list(w) for w in windows]
    for k in range(len(out) - 1):
        mid = 0.5 * (pairs[k][1] + pairs[k + 1][0])
        out[k][1] = min(out[k][1], mid)
        out[k + 1][0] = max(out[k + 1][0], mid)
    return [tuple(w) for w in out]


# --- model file -----------------------------------------------------------


def format_model(model: MbvdModel) -> str:
    lines = [
        f"rs_ohm {model.rs:.12g}",
        f"ls_h {model.ls:.12g}",
        f"c0_f {model.c0:.12g}",
        f"r0_ohm {model.r0:.12g}",
    ]
    for b in model.branches:
        lines.append(f"branch {b.rm:.12g} {b.lm:.12g} {b.cm:.12g}")
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> MbvdModel:
    values: dict[str, float] = {}
    branches = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        key = parts[0]
        try:
            if key == "branch":
                if len(parts) != 4:
                    raise FitError(f"line {lineno}: expected 'branch rm_ohm lm_h cm_f'")
                branches.append(MotionalBranch(*(float(p) for p in parts[1:])))
            elif key in ("rs_ohm", "ls_h", "c0_f", "r0_ohm"):
                if len(parts) != 2:
                    raise FitError(f"line {lineno}: expected '{key} <value>'")
                values[key] = float(parts[1])
            else:
                raise FitError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise FitError(f"line {lineno}: {exc}") from None
    if "c0_f" not in values:
        raise FitError("model file lacks c0_f")
    return MbvdModel(
        values.get("rs_ohm", 0.0), values.get("ls_h", 0.0), values["c0_f"], values.get("r0_ohm", 0.0), tuple(branches)
    )


def write_model(model: MbvdModel, path: Union[str, Path]) -> None:
    Path(path).write_text(format_model(model))


def read_model(path: Union[str, Path]) -> MbvdModel:
    return parse_model(Path(path).read_text())


def model_coupling_check(model: MbvdModel, spectrum: AdmittanceSpectrum) -> list[tuple[float, float]]:
    """(derived k2, pair k2) per matched branch, for consistency checks."""
    pairs = find_resonances(spectrum)
    out = []
    for m, (fs, fp) in zip(derive_metrics(model), pairs):
        out.append((m.k2, coupling(fs, fp)))
    return out
