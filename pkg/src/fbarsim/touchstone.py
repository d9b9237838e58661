"""Touchstone v1 (.s1p/.s2p) reading and writing, and device admittance
extraction from one- and two-port scattering data.

Only the version 1 grammar is accepted: an option line
``# <unit> S <RI|MA|DB> R <z0>``, ``!`` comments, one frequency point per
line.  Two-port columns follow the v1 order S11 S21 S12 S22.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from fbarsim.mason import AdmittanceSpectrum

UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
FORMATS = ("RI", "MA", "DB")
TOPOLOGIES = ("one_port", "series_thru", "shunt_thru")
SINGULAR_TOL = 1e-12

# v1 column order for a two-port point: S11 S21 S12 S22
_TWO_PORT_ORDER = ((0, 0), (1, 0), (0, 1), (1, 1))


class TouchstoneError(ValueError):
    pass


@dataclass
class NetworkData:
    frequencies: np.ndarray
    s: np.ndarray  # shape (n_freq, n_ports, n_ports)
    z0: float = 50.0

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        s = np.asarray(self.s, dtype=complex)
        if s.ndim == 1:
            s = s[:, None, None]
        self.s = s
        if s.ndim != 3 or s.shape[1] != s.shape[2] or s.shape[1] not in (1, 2):
            raise TouchstoneError(f"S data must have shape (n, 1, 1) or (n, 2, 2), got {s.shape}")
        if len(self.frequencies) != len(s):
            raise TouchstoneError("frequency and S-parameter counts differ")
        if np.any(np.diff(self.frequencies) <= 0):
            raise TouchstoneError("frequencies must be strictly increasing")
        if not np.all(np.isfinite(s)):
            raise TouchstoneError("S-parameters must be finite")
        if not self.z0 > 0:
            raise TouchstoneError(f"reference impedance must be > 0, got {self.z0}")

    @property
    def n_ports(self) -> int:
        return self.s.shape[1]

    def __len__(self):
        return len(self.frequencies)


def _parse_option_line(parts: list[str], lineno: int) -> tuple[float, str, float]:
    unit, fmt, z0 = "GHZ", "MA", 50.0
    tokens = [p.upper() for p in parts]
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok in UNITS:
            unit = tok
        elif tok in FORMATS:
            fmt = tok
        elif tok == "S":
            pass
        elif tok in ("Y", "Z", "H", "G"):
            raise TouchstoneError(f"line {lineno}: only S-parameter files are supported, got {parts[i]!r}")
        elif tok == "R":
            if i + 1 >= len(tokens):
                raise TouchstoneError(f"line {lineno}: 'R' needs a reference impedance")
            try:
                z0 = float(tokens[i + 1])
            except ValueError:
                raise TouchstoneError(f"line {lineno}: bad reference impedance {parts[i + 1]!r}") from None
            i += 1
        else:
            raise TouchstoneError(f"line {lineno}: unknown option {parts[i]!r}")
        i += 1
    return UNITS[unit], fmt, z0


def _to_complex(a: np.ndarray, b: np.ndarray, fmt: str) -> np.ndarray:
    if fmt == "RI":
        return a + 1j * b
    mag = a if fmt == "MA" else 10 ** (a / 20)
    return mag * np.exp(1j * np.deg2rad(b))


def parse_touchstone(text: str, n_ports: int, origin: str = "<string>") -> NetworkData:
    if n_ports not in (1, 2):
        raise TouchstoneError(f"only 1- and 2-port files are supported, got {n_ports}")
    n_cols = 1 + 2 * n_ports * n_ports
    option: Optional[tuple[float, str, float]] = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            raise TouchstoneError(f"{origin}:{lineno}: Touchstone v2 keyword {line.split()[0]!r} is not supported (v1 only)")
        if line.startswith("#"):
            if option is None:
                option = _parse_option_line(line[1:].split(), lineno)
            continue
        if option is None:
            raise TouchstoneError(f"{origin}:{lineno}: data before the '#' option line")
        parts = line.split()
        if len(parts) != n_cols:
            raise TouchstoneError(f"{origin}:{lineno}: expected {n_cols} columns for a {n_ports}-port file, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise TouchstoneError(f"{origin}:{lineno}: non-numeric entry") from None
        if len(rows) > 1 and not rows[-1][0] > rows[-2][0]:
            raise TouchstoneError(f"{origin}:{lineno}: frequencies must be strictly increasing")
    if option is None:
        raise TouchstoneError(f"{origin}: missing '#' option line")
    if not rows:
        raise TouchstoneError(f"{origin}: no data points")
    scale, fmt, z0 = option
    data = np.array(rows)
    values = _to_complex(data[:, 1::2], data[:, 2::2], fmt)
    s = np.empty((len(data), n_ports, n_ports), dtype=complex)
    if n_ports == 1:
        s[:, 0, 0] = values[:, 0]
    else:
        for col, (i, j) in enumerate(_TWO_PORT_ORDER):
            s[:, i, j] = values[:, col]
    return NetworkData(data[:, 0] * scale, s, z0)


def ports_from_suffix(path: Union[str, Path]) -> int:
    suffix = Path(path).suffix.lower()
    if suffix == ".s1p":
        return 1
    if suffix == ".s2p":
        return 2
    raise TouchstoneError(f"{path}: expected a .s1p or .s2p file")


def read_touchstone(path: Union[str, Path]) -> NetworkData:
    n_ports = ports_from_suffix(path)
    return parse_touchstone(Path(path).read_text(), n_ports, origin=str(path))


def _pair(value: complex, fmt: str, digits: int) -> str:
    if fmt == "RI":
        a, b = value.real, value.imag
    else:
        mag = abs(value)
        a = mag if fmt == "MA" else (20 * math.log10(mag) if mag > 0 else -400.0)
        b = math.degrees(math.atan2(value.imag, value.real))
    return f"{a:.{digits}g} {b:.{digits}g}"


def format_touchstone(net: NetworkData, fmt: str = "RI", unit: str = "GHz", digits: int = 12) -> str:
    fmt, key = fmt.upper(), unit.upper()
    if fmt not in FORMATS:
        raise TouchstoneError(f"unknown format {fmt!r}; choose from {FORMATS}")
    if key not in UNITS:
        raise TouchstoneError(f"unknown unit {unit!r}")
    order = ((0, 0),) if net.n_ports == 1 else _TWO_PORT_ORDER
    lines = [f"# {unit} S {fmt} R {net.z0:g}"]
    for f, s in zip(net.frequencies, net.s):
        cols = " ".join(_pair(complex(s[i, j]), fmt, digits) for i, j in order)
        lines.append(f"{f / UNITS[key]:.{digits}g} {cols}")
    return "\n".join(lines) + "\n"


def write_touchstone(net: NetworkData, path: Union[str, Path], fmt: str = "RI", unit: str = "GHz", digits: int = 12) -> None:
    if ports_from_suffix(path) != net.n_ports:
        raise TouchstoneError(f"{path}: suffix does not match a {net.n_ports}-port network")
    Path(path).write_text(format_touchstone(net, fmt, unit, digits))


# --- network conversions ---------------------------------------------------


def s_from_abcd(abcd: np.ndarray, z0: float = 50.0) -> np.ndarray:
    """S matrices (n, 2, 2) from ABCD matrices (n, 2, 2), equal real reference."""
    a, b, c, d = abcd[:, 0, 0], abcd[:, 0, 1], abcd[:, 1, 0], abcd[:, 1, 1]
    den = a + b / z0 + c * z0 + d
    s = np.empty(abcd.shape, dtype=complex)
    s[:, 0, 0] = (a + b / z0 - c * z0 - d) / den
    s[:, 0, 1] = 2 * (a * d - b * c) / den
    s[:, 1, 0] = 2 / den
    s[:, 1, 1] = (-a + b / z0 - c * z0 + d) / den
    return s


def network_from_admittance(frequencies, y_dut, topology: str = "series_thru", z0: float = 50.0) -> NetworkData:
    """Synthetic S data of a device embedded as ``topology``."""
    y = np.asarray(y_dut, dtype=complex)
    if topology == "one_port":
        zd = 1 / y
        return NetworkData(frequencies, ((zd - z0) / (zd + z0))[:, None, None], z0)
    abcd = np.zeros((len(y), 2, 2), dtype=complex)
    abcd[:, 0, 0] = abcd[:, 1, 1] = 1
    if topology == "series_thru":
        abcd[:, 0, 1] = 1 / y
    elif topology == "shunt_thru":
        abcd[:, 1, 0] = y
    else:
        raise TouchstoneError(f"unknown topology {topology!r}; choose from {TOPOLOGIES}")
    return NetworkData(frequencies, s_from_abcd(abcd, z0), z0)


def _checked_inverse(m: np.ndarray, what: str) -> np.ndarray:
    det = np.linalg.det(m)
    if np.any(np.abs(det) < SINGULAR_TOL):
        k = int(np.argmin(np.abs(det)))
        raise TouchstoneError(f"singular conversion: |det({what})| = {abs(det[k]):.3g} at point {k}")
    return np.linalg.inv(m)


def to_device_admittance(net: NetworkData, topology: Optional[str] = None) -> AdmittanceSpectrum:
    """Device admittance from measured S data.

    ``one_port``:    Y = (1 - S11) / ((1 + S11) z0)
    ``series_thru``: Y = -Y21 of the two-port admittance matrix
    ``shunt_thru``:  Y = 1 / Z21 of the two-port impedance matrix
    The default is ``one_port`` for .s1p data and ``series_thru`` for .s2p.
    """
    if topology is None:
        topology = "one_port" if net.n_ports == 1 else "series_thru"
    if topology not in TOPOLOGIES:
        raise TouchstoneError(f"unknown topology {topology!r}; choose from {TOPOLOGIES}")
    meta = {"topology": topology, "z0": net.z0}
    if topology == "one_port":
        if net.n_ports != 1:
            raise TouchstoneError("one_port topology needs a 1-port network")
        s11 = net.s[:, 0, 0]
        if np.any(np.abs(1 + s11) < SINGULAR_TOL):
            raise TouchstoneError("singular conversion: |1 + S11| below 1e-12")
        return AdmittanceSpectrum(net.frequencies, (1 - s11) / ((1 + s11) * net.z0), "measured", meta)
    if net.n_ports != 2:
        raise TouchstoneError(f"{topology} topology needs a 2-port network")
    eye = np.eye(2)
    if topology == "series_thru":
        ymat = (eye - net.s) @ _checked_inverse(eye + net.s, "I + S") / net.z0
        y = -ymat[:, 1, 0]
    else:
        zmat = net.z0 * (eye + net.s) @ _checked_inverse(eye - net.s, "I - S")
        z21 = zmat[:, 1, 0]
        if np.any(np.abs(z21) < SINGULAR_TOL):
            raise TouchstoneError("singular conversion: Z21 vanishes")
        y = 1 / z21
    return AdmittanceSpectrum(net.frequencies, y, "measured", meta)
