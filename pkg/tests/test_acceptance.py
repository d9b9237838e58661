"""Acceptance criteria, one test and one printed PASS/FAIL line per criterion.

Tolerances are the ones fixed by the project requirements; nothing here is
tuned to the implementation.
"""

import math
import time

import numpy as np
import pytest

from fbarsim.materials import derive_acoustics
from fbarsim.mason import DEFAULT_GRID, FrequencyGrid, input_admittance
from fbarsim.mbvd import evaluate, fit_mbvd
from fbarsim.modes import ModeReport, by_label, coupling, find_resonances, fom
from fbarsim.stack import bare_plate
from fbarsim.survey import merge_survey
from fbarsim.touchstone import NetworkData, format_touchstone, network_from_admittance, parse_touchstone, to_device_admittance
from synth import add_noise, flat_params, model_spectrum, random_model


def _pct(got, want):
    return 100 * (got / want - 1)


def test_c1_fom_arithmetic(criterion):
    a, b = fom(0.037, 64), fom(0.040, 56)
    ok = f"{a:.2f}" == "2.37" and f"{b:.2f}" == "2.24" and math.isclose(a, 2.368) and math.isclose(b, 2.24)
    criterion("C1 FoM arithmetic", ok, f"0.037*64 = {a:.4g} -> {a:.2f}; 0.040*56 = {b:.4g} -> {b:.2f}")


def test_c2_quartet_golden_values(criterion, quartet_modes):
    checks = [
        ("Al-Al", "S1", 22.53e9, 0.05),
        ("Al-Al", "S3", 56.43e9, 0.07),
        ("Al-Pt", "S1", 13.56e9, 0.10),
        ("Pt-Pt", "S1", 9.97e9, 0.10),
        ("Al-Pt", "S3", 42.54e9, 0.10),
        ("Pt-Pt", "S3", 42.68e9, 0.10),
    ]
    parts, ok = [], True
    for key, label, target, tol in checks:
        r = by_label(quartet_modes[key]).get(label)
        good = r is not None and abs(r.fs / target - 1) <= tol
        ok &= good
        got = "missing" if r is None else f"{r.fs / 1e9:.2f} GHz ({_pct(r.fs, target):+.1f}%)"
        parts.append(f"{key} {label} {got} vs {target / 1e9:.2f} +/-{tol:.0%} {'ok' if good else 'OUT'}")
    criterion("C2 quartet golden values", ok, "; ".join(parts))


def test_c3_ordering_invariants(criterion, quartet_modes):
    m = {k: by_label(v) for k, v in quartet_modes.items()}
    fs = [m[k]["S1"].fs for k in ("Pt-Pt", "Al-Pt", "Al-Al")]
    k2 = [m[k]["S3"].k2 for k in ("Pt-Pt", "Al-Pt", "Al-Al")]
    fs_ok = fs[0] < fs[1] < fs[2]
    k2_ok = k2[0] < k2[1] < k2[2]
    detail = (
        f"fs(S1) Pt-Pt/Al-Pt/Al-Al = {'/'.join(f'{v / 1e9:.2f}' for v in fs)} GHz {'ok' if fs_ok else 'VIOLATED'}; "
        f"k2(S3) = {'/'.join(f'{100 * v:.2f}' for v in k2)} % {'ok' if k2_ok else 'VIOLATED'}"
    )
    criterion("C3 ordering invariants", fs_ok and k2_ok, detail)


def _a2_coupling(stack, grid, s1, s3):
    """Largest coupling of any pair strictly between S1 and S3 (0 if none)."""
    pairs = [p for p in find_resonances(input_admittance(stack, grid)) if s1 < p[0] < s3]
    return max((coupling(*p) for p in pairs), default=0.0), len(pairs)


def test_c4_symmetry_and_a2(criterion, quartet, quartet_modes, lossless_catalog):
    from fbarsim.stack import canonical_quartet

    fine = FrequencyGrid(5e9, 70e9, 65001)
    lossless = canonical_quartet(lossless_catalog)
    parts, ok = [], True
    for key in ("Al-Al", "Pt-Pt"):
        modes = by_label(quartet_modes[key])
        s1, s3 = modes["S1"].fp, modes["S3"].fs
        k_lossy, _ = _a2_coupling(quartet[key], DEFAULT_GRID, s1, s3)
        exact = find_resonances(input_admittance(lossless[key], fine))
        k_exact, _ = _a2_coupling(lossless[key], fine, exact[0][1], exact[-1][0])
        good = "A2" not in modes and k_lossy < 1e-6 and k_exact < 1e-6
        ok &= good
        parts.append(f"{key} A2 coupling {max(k_lossy, k_exact):.1e}")
    for key in ("Pt-Al", "Al-Pt"):
        modes = by_label(quartet_modes[key])
        a2 = modes.get("A2")
        good = a2 is not None and modes["S1"].fs < a2.fs < modes["S3"].fs
        ok &= good
        parts.append(f"{key} A2 " + ("missing" if a2 is None else f"at {a2.fs / 1e9:.2f} GHz, k2 {100 * a2.k2:.2f} %"))
    criterion("C4 symmetry / A2", ok, "; ".join(parts))


def _bisect(fun, lo, hi, iters=200):
    flo = fun(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_c5_free_plate_oracle(criterion, lossless_catalog):
    from fbarsim.calibration import refine_extremum

    m = lossless_catalog["Sc0.3Al0.7N"]
    t = 85e-9
    d = derive_acoustics(m)
    fp_exact = d.velocity / (2 * t)
    # fs from (x/2) cot(x/2) = kt2 with x = 2 pi f t / v, solved by bisection on (0, pi)
    x = _bisect(lambda x: (x / 2) / math.tan(x / 2) - d.kt2, 1e-6, math.pi - 1e-12)
    fs_exact = x * d.velocity / (2 * math.pi * t)
    plate = bare_plate(m, t)
    grid = FrequencyGrid(0.5 * fs_exact, 1.5 * fp_exact, 4001)
    (fs_grid, fp_grid), = find_resonances(input_admittance(plate, grid))
    step = grid.step
    fs = refine_extremum(plate, fs_grid - 2 * step, fs_grid + 2 * step, "fs")
    fp = refine_extremum(plate, fp_grid - 2 * step, fp_grid + 2 * step, "fp")
    e_fp, e_fs = abs(fp / fp_exact - 1), abs(fs / fs_exact - 1)
    criterion(
        "C5 free-plate oracle",
        e_fp < 1e-6 and e_fs < 1e-4,
        f"fp {fp / 1e9:.6f} GHz vs v/2t {fp_exact / 1e9:.6f} (err {e_fp:.1e} < 1e-6); "
        f"fs {fs / 1e9:.6f} vs bisection {fs_exact / 1e9:.6f} (err {e_fs:.1e} < 1e-4)",
    )


N_MODELS = 50
N_SEEDS = 20
SNR_DB = 40.0
N_POINTS = 1001


def test_c6_mbvd_round_trip(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2026)
    worst_param = worst_fs = worst_q = 0.0
    count_mismatch = 0
    for i in range(N_MODELS):
        model, span = random_model(rng, 1 + i % 3)
        clean = model_spectrum(model, span, N_POINTS)
        fitted = fit_mbvd(clean).model
        if len(fitted.branches) != len(model.branches):
            count_mismatch += 1
            worst_param = math.inf
        else:
            worst_param = max(worst_param, float(np.max(np.abs(flat_params(fitted) / flat_params(model) - 1))))
        fs_err, q_err = [], []
        for seed in range(N_SEEDS):
            noisy = add_noise(clean, SNR_DB, np.random.default_rng(10_000 * i + seed))
            got = fit_mbvd(noisy).model.branches
            if len(got) != len(model.branches):
                fs_err.append([math.inf] * len(model.branches))
                q_err.append([math.inf] * len(model.branches))
                continue
            fs_err.append([abs(a.fs / b.fs - 1) for a, b in zip(got, model.branches)])
            q_err.append([abs(a.q / b.q - 1) for a, b in zip(got, model.branches)])
        worst_fs = max(worst_fs, float(np.max(np.median(fs_err, axis=0))))
        worst_q = max(worst_q, float(np.max(np.median(q_err, axis=0))))
    elapsed = time.perf_counter() - t0
    ok = worst_param < 0.01 and worst_fs < 1e-3 and worst_q < 0.05 and elapsed < 60
    criterion(
        "C6 mBVD round trip",
        ok,
        f"{N_MODELS} models x (1 clean + {N_SEEDS} noisy) fits: worst noiseless parameter error {worst_param:.1e} (< 1%); "
        f"worst median fs error {100 * worst_fs:.4f}% (< 0.1%), Q error {100 * worst_q:.2f}% (< 5%) at {SNR_DB:g} dB; "
        f"{elapsed:.1f} s (< 60 s)" + (f"; {count_mismatch} branch-count mismatches" if count_mismatch else ""),
    )


def test_c7_passivity(criterion, quartet):
    worst = math.inf
    for s in quartet.values():
        worst = min(worst, float(np.min(input_admittance(s, DEFAULT_GRID).y.real)))
    rng = np.random.default_rng(7)
    worst_fit = math.inf
    for i in range(5):
        model, span = random_model(rng, 1 + i % 3)
        fitted = fit_mbvd(add_noise(model_spectrum(model, span), SNR_DB, rng)).model
        assert min(fitted.rs, fitted.r0, *(b.rm for b in fitted.branches)) >= 0
        worst_fit = min(worst_fit, float(np.min(evaluate(fitted, DEFAULT_GRID.frequencies).y.real)))
    ok = worst >= -1e-15 and worst_fit >= -1e-15
    criterion("C7 passivity", ok, f"min Re(Y) quartet {worst:.3g} S, fitted models {worst_fit:.3g} S (>= -1e-15)")


def test_c8_touchstone_conformance(criterion):
    rng = np.random.default_rng(8)
    n = 25
    s = (rng.uniform(0.01, 1.0, (n, 2, 2)) * np.exp(1j * rng.uniform(-np.pi, np.pi, (n, 2, 2))))
    net = NetworkData(np.linspace(1e9, 70e9, n), s, 50.0)
    parsed = {fmt: parse_touchstone(format_touchstone(net, fmt, "GHz", digits=17), 2).s for fmt in ("RI", "MA", "DB")}
    fmt_err = max(float(np.max(np.abs(parsed[f] - parsed["RI"]) / np.abs(parsed["RI"]))) for f in ("MA", "DB"))
    y = rng.uniform(1e-5, 1e-1, n) * np.exp(1j * rng.uniform(-np.pi / 2, np.pi / 2, n))
    back = to_device_admittance(network_from_admittance(net.frequencies, y, "series_thru"), "series_thru").y
    thru_err = float(np.max(np.abs(back / y - 1)))
    ok = fmt_err < 1e-9 and thru_err < 1e-12
    criterion("C8 Touchstone conformance", ok, f"RI/MA/DB spread {fmt_err:.1e} (< 1e-9); series-thru identity {thru_err:.1e} (< 1e-12)")


def test_c9_measured_worked_example(criterion):
    reports = [
        ModeReport("S1", 13.7e9, 13.7e9 / math.sqrt(1 - 8 * 0.040 / math.pi**2), 0.040, 116, "mbvd"),
        ModeReport("S3", 61.6e9, 61.6e9 / math.sqrt(1 - 8 * 0.018 / math.pi**2), 0.018, 94, "mbvd"),
    ]
    entries = merge_survey(reports, [])
    foms = [e.fom for e in entries]
    ok = [round(f, 10) for f in foms] == [4.64, 1.692] and [fom(r.k2, r.q) for r in reports] == pytest.approx([4.64, 1.692], abs=1e-12)
    criterion("C9 measured worked example", ok, f"FoM S1 {foms[0]:.4g}, S3 {foms[1]:.4g} (4.64, 1.692)")
