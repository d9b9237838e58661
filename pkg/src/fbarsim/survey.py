"""Comparison tables of k2, Q and FoM against reported resonators.

Literature values are always user data read from a CSV with the columns
``source,technology,freq_hz,k2,q,fom`` (``fom`` may be left empty).
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from fbarsim.export import format_table
from fbarsim.modes import ModeReport
from fbarsim.modes import fom as _fom

SURVEY_HEADER = ("source", "technology", "freq_hz", "k2", "q", "fom")
OWN_SOURCE = "this work"
FLOOR_HZ = 10e9
FOM_RTOL = 0.01


class SurveyError(ValueError):
    pass


class SurveyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SurveyEntry:
    source: str
    technology: str
    frequency: float
    k2: float
    q: float
    fom: Optional[float] = None

    def __post_init__(self):
        if not self.frequency > 0:
            raise SurveyError(f"{self.source}: frequency must be > 0")
        if self.k2 < 0 or self.q < 0:
            raise SurveyError(f"{self.source}: k2 and q must be >= 0")
        product = _fom(self.k2, self.q)
        if self.fom is None:
            object.__setattr__(self, "fom", product)
        elif not math.isclose(self.fom, product, rel_tol=FOM_RTOL, abs_tol=1e-12):
            warnings.warn(
                f"{self.source} at {self.frequency / 1e9:.4g} GHz: fom {self.fom:g} disagrees with k2*q = {product:g}; using k2*q",
                SurveyWarning,
                stacklevel=3,
            )
            object.__setattr__(self, "fom", product)

    @property
    def below_floor(self) -> bool:
        """True for entries under the 10 GHz survey floor (kept, but flagged)."""
        return self.frequency < FLOOR_HZ


def entries_from_reports(
    reports: Iterable[ModeReport], technology: str = "ScAlN", source: str = OWN_SOURCE
) -> list[SurveyEntry]:
    out = []
    for r in reports:
        if r.q is None:
            warnings.warn(f"{r.label} at {r.fs / 1e9:.4g} GHz has no Q; left out of the survey", SurveyWarning, stacklevel=2)
            continue
        out.append(SurveyEntry(source, technology, r.fs, r.k2, r.q, r.fom))
    return out


def merge_survey(
    own: Iterable[ModeReport],
    literature: Iterable[SurveyEntry] = (),
    technology: str = "ScAlN",
) -> list[SurveyEntry]:
    """Own reports plus literature rows, deduplicated and sorted by frequency.

    The sort is stable, so rows at equal frequency keep their input order
    (own entries first).  Merging an already merged list again is a no-op.
    """
    seen = set()
    merged = []
    for e in entries_from_reports(own, technology) + list(literature):
        if e in seen:
            continue
        seen.add(e)
        merged.append(e)
    return sorted(merged, key=lambda e: e.frequency)


def _num(v: float) -> str:
    return f"{v:.12g}"


def format_survey_csv(entries: Sequence[SurveyEntry]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SURVEY_HEADER)
    for e in entries:
        w.writerow((e.source, e.technology, _num(e.frequency), _num(e.k2), _num(e.q), _num(e.fom)))
    return buf.getvalue()


def parse_survey_csv(text: str, origin: str = "<string>") -> list[SurveyEntry]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        return []
    if tuple(c.strip() for c in header) != SURVEY_HEADER:
        raise SurveyError(f"{origin}: expected header {','.join(SURVEY_HEADER)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row or row[0].lstrip().startswith("#"):
            continue
        if len(row) != len(SURVEY_HEADER):
            raise SurveyError(f"{origin}:{lineno}: expected {len(SURVEY_HEADER)} fields, got {len(row)}")
        source, tech, f, k2, q, fom = (c.strip() for c in row)
        try:
            out.append(SurveyEntry(source, tech, float(f), float(k2), float(q), float(fom) if fom else None))
        except ValueError as exc:
            raise SurveyError(f"{origin}:{lineno}: {exc}") from None
    return out


def read_survey(path: Union[str, Path]) -> list[SurveyEntry]:
    return parse_survey_csv(Path(path).read_text(), origin=str(path))


def survey_table(entries: Sequence[SurveyEntry]) -> str:
    rows = [
        (
            e.source,
            e.technology,
            f"{e.frequency / 1e9:.2f}" + ("*" if e.below_floor else ""),
            f"{e.k2 * 100:.2f}",
            f"{e.q:.0f}",
            f"{e.fom:.2f}",
        )
        for e in entries
    ]
    text = format_table(("source", "technology", "f_GHz", "k2_%", "Q", "FoM"), rows)
    if any(e.below_floor for e in entries):
        text += "* below the 10 GHz survey floor\n"
    return text


def emit_survey(entries: Sequence[SurveyEntry], path: Union[str, Path], table_path: Optional[Union[str, Path]] = None) -> str:
    """Write the plot-ready CSV (and optionally the text table); returns the table."""
    ordered = sorted(entries, key=lambda e: e.frequency)
    Path(path).write_text(format_survey_csv(ordered))
    table = survey_table(ordered)
    if table_path is not None:
        Path(table_path).write_text(table)
    return table
