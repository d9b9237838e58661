"""Film material constants and the derived 1D thickness-mode acoustics.

Materials files are line oriented::

    # name  rho_kg_m3  c33_Pa  e33_C_m2  epsr  Qm
    Al      2700       1.1128e11  0     1.0   50
    Pt      21450      3.3637e11  0     1.0   Qm=inf

Fields are whitespace separated.  ``#`` starts a comment (whole line or
trailing).  ``epsr`` is the relative permittivity and is converted to an
absolute value on load.  ``Qm`` is a positive number, ``inf`` for a lossless
film, and may be written with a ``Qm=`` prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Union

import numpy as np

EPS0 = 8.8541878128e-12  # F/m

LOSSLESS = math.inf

_DEFAULT_FILE = "default_materials.txt"


class MaterialError(ValueError):
    """Raised for malformed or physically invalid material records."""


@dataclass(frozen=True)
class Material:
    """Constants of one film along the thickness (3) axis.

    ``c33`` is the constant-field stiffness; piezoelectric stiffening is added
    by :func:`derive_acoustics`.  ``permittivity`` is absolute (F/m).
    ``mech_q`` is ``math.inf`` for a lossless film.
    """

    name: str
    density: float
    c33: float
    e33: float = 0.0
    permittivity: float = EPS0
    mech_q: float = 50.0

    def __post_init__(self):
        if not self.density > 0:
            raise MaterialError(f"{self.name}: density must be > 0, got {self.density}")
        if not self.c33 > 0:
            raise MaterialError(f"{self.name}: c33 must be > 0, got {self.c33}")
        if not self.permittivity > 0:
            raise MaterialError(f"{self.name}: permittivity must be > 0, got {self.permittivity}")
        if self.e33 < 0:
            raise MaterialError(f"{self.name}: e33 must be >= 0, got {self.e33}")
        if not self.mech_q > 0:
            raise MaterialError(f"{self.name}: mech_q must be > 0 or inf, got {self.mech_q}")

    @property
    def is_piezo(self) -> bool:
        return self.e33 > 0

    @property
    def lossless(self) -> bool:
        return math.isinf(self.mech_q)

    @property
    def epsr(self) -> float:
        return self.permittivity / EPS0


@dataclass(frozen=True)
class DerivedAcoustics:
    c_stiffened: float
    velocity: float
    specific_impedance: float
    kt2: float
    complex_stiffness: complex


def derive_acoustics(m: Material) -> DerivedAcoustics:
    c_d = m.c33 + m.e33**2 / m.permittivity
    v = math.sqrt(c_d / m.density)
    loss = 0.0 if m.lossless else 1.0 / m.mech_q
    return DerivedAcoustics(
        c_stiffened=c_d,
        velocity=v,
        specific_impedance=m.density * v,
        kt2=m.e33**2 / (c_d * m.permittivity),
        complex_stiffness=complex(c_d, c_d * loss),
    )


def complex_velocity(m: Material) -> complex:
    """Phase velocity from the lossy stiffened modulus (principal root)."""
    return complex(np.sqrt(derive_acoustics(m).complex_stiffness / m.density))


def complex_impedance(m: Material) -> complex:
    """Specific acoustic impedance rho*v with loss, Pa*s/m."""
    return m.density * complex_velocity(m)


def _parse_q(token: str, lineno: int) -> float:
    raw = token[3:] if token.lower().startswith("qm=") else token
    try:
        q = float(raw)
    except ValueError:
        raise MaterialError(f"line {lineno}: bad Qm value {token!r}") from None
    return q


def parse_materials(text: str, origin: str = "<string>") -> dict[str, Material]:
    catalog: dict[str, Material] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise MaterialError(
                f"{origin}: line {lineno}: expected 6 fields "
                f"(name rho c33 e33 epsr Qm), got {len(parts)}"
            )
        name = parts[0]
        if name in catalog:
            raise MaterialError(f"{origin}: line {lineno}: duplicate material name {name!r}")
        try:
            rho, c33, e33, epsr = (float(p) for p in parts[1:5])
        except ValueError:
            raise MaterialError(f"{origin}: line {lineno}: non-numeric field in {line!r}") from None
        q = _parse_q(parts[5], lineno)
        try:
            catalog[name] = Material(name, rho, c33, e33, epsr * EPS0, q)
        except MaterialError as exc:
            raise MaterialError(f"{origin}: line {lineno}: {exc}") from None
    return catalog


def load_materials(source: Union[str, Path]) -> dict[str, Material]:
    """Read a materials file into a name -> Material mapping."""
    path = Path(source)
    return parse_materials(path.read_text(), origin=str(path))


def format_materials(catalog: Mapping[str, Material]) -> str:
    lines = ["# name rho_kg_m3 c33_Pa e33_C_m2 epsr Qm"]
    for m in catalog.values():
        q = "inf" if m.lossless else repr(m.mech_q)
        lines.append(f"{m.name} {m.density!r} {m.c33!r} {m.e33!r} {m.epsr!r} {q}")
    return "\n".join(lines) + "\n"


_default_cache: dict[str, Material] | None = None


def default_catalog() -> dict[str, Material]:
    """The bundled catalog (Sc0.3Al0.7N, AlN, Al, Pt, SiO2, Si)."""
    global _default_cache
    if _default_cache is None:
        text = resources.files("fbarsim.data").joinpath(_DEFAULT_FILE).read_text()
        _default_cache = parse_materials(text, origin=_DEFAULT_FILE)
    return dict(_default_cache)
