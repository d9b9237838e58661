"""CSV and text-table output for spectra and mode reports.

Numbers are written with 12 significant digits, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from fbarsim.mason import AdmittanceSpectrum
from fbarsim.modes import ModeReport

SPECTRUM_HEADER = ("freq_hz", "re_y_s", "im_y_s")
REPORT_HEADER = ("label", "fs_hz", "fp_hz", "k2", "q", "q_source", "fom")


class ExportError(ValueError):
    pass


def _num(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.12g}"


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def format_spectrum_csv(spectrum: AdmittanceSpectrum) -> str:
    rows = ((_num(f), _num(y.real), _num(y.imag)) for f, y in zip(spectrum.frequencies, spectrum.y))
    return _csv_text(SPECTRUM_HEADER, rows)


def format_report_csv(reports: Sequence[ModeReport]) -> str:
    rows = ((r.label, _num(r.fs), _num(r.fp), _num(r.k2), _num(r.q), r.q_source or "", _num(r.fom)) for r in reports)
    return _csv_text(REPORT_HEADER, rows)


def write_csv(obj: Union[AdmittanceSpectrum, Sequence[ModeReport]], path: Union[str, Path]) -> None:
    if isinstance(obj, AdmittanceSpectrum):
        text = format_spectrum_csv(obj)
    else:
        text = format_report_csv(list(obj))
    Path(path).write_text(text)


def _rows(text: str, header: Sequence[str], origin: str):
    reader = csv.reader(io.StringIO(text))
    try:
        first = next(reader)
    except StopIteration:
        raise ExportError(f"{origin}: empty file") from None
    if tuple(c.strip() for c in first) != tuple(header):
        raise ExportError(f"{origin}: expected header {','.join(header)}")
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ExportError(f"{origin}:{lineno}: expected {len(header)} fields, got {len(row)}")
        yield lineno, row


def parse_spectrum_csv(text: str, origin: str = "<string>", provenance: str = "simulated") -> AdmittanceSpectrum:
    data = []
    for lineno, row in _rows(text, SPECTRUM_HEADER, origin):
        try:
            data.append([float(v) for v in row])
        except ValueError:
            raise ExportError(f"{origin}:{lineno}: non-numeric entry") from None
    arr = np.array(data, dtype=float).reshape(-1, 3)
    return AdmittanceSpectrum(arr[:, 0], arr[:, 1] + 1j * arr[:, 2], provenance)


def read_spectrum_csv(path: Union[str, Path]) -> AdmittanceSpectrum:
    return parse_spectrum_csv(Path(path).read_text(), origin=str(path))


def parse_report_csv(text: str, origin: str = "<string>") -> list[ModeReport]:
    out = []
    for lineno, row in _rows(text, REPORT_HEADER, origin):
        label, fs, fp, k2, q, source, _ = (c.strip() for c in row)
        try:
            out.append(ModeReport(label, float(fs), float(fp), float(k2), float(q) if q else None, source or None))
        except ValueError as exc:
            raise ExportError(f"{origin}:{lineno}: {exc}") from None
    return out


def read_report_csv(path: Union[str, Path]) -> list[ModeReport]:
    return parse_report_csv(Path(path).read_text(), origin=str(path))


def format_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Left-aligned first column, right-aligned rest, two-space gutters."""
    cells = [list(header)] + [list(r) for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for r in cells:
        parts = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(parts).rstrip())
    return "\n".join(lines) + "\n"


def report_table(reports: Sequence[ModeReport]) -> str:
    rows = []
    for r in reports:
        rows.append(
            (
                r.label,
                f"{r.fs / 1e9:.3f}",
                f"{r.fp / 1e9:.3f}",
                f"{r.k2 * 100:.2f}",
                "-" if r.q is None else f"{r.q:.1f}",
                r.q_source or "-",
                "-" if r.fom is None else f"{r.fom:.2f}",
            )
        )
    return format_table(("mode", "fs_GHz", "fp_GHz", "k2_%", "Q", "Q_src", "FoM"), rows)
