"""Layered resonator description and the stack-file format.

Stack file grammar (one directive per line, ``#`` comments)::

    area_um2 154
    layer Pt 45                # bottom electrode first
    layer Sc0.3Al0.7N 85 piezo
    layer Pt 45
    termination top free
    termination bottom free    # or a catalog material (semi-infinite)

Layers are listed bottom to top with thickness in nm.  ``area_um2``
defaults to 154 (14 um x 11 um).  Terminations default to free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from fbarsim.materials import Material

DEFAULT_AREA = 14e-6 * 11e-6
MAX_TOTAL_THICKNESS = 10e-6

QUARTET_ELECTRODE = 45e-9
QUARTET_PIEZO = 85e-9
QUARTET_PIEZO_MATERIAL = "Sc0.3Al0.7N"


class StackError(ValueError):
    pass


@dataclass(frozen=True)
class Layer:
    material: Material
    thickness: float
    is_piezo_active: bool = False

    def __post_init__(self):
        if not self.thickness > 0:
            raise StackError(f"layer {self.material.name}: thickness must be > 0, got {self.thickness}")
        if self.is_piezo_active and not self.material.is_piezo:
            raise StackError(f"layer {self.material.name}: marked piezo but e33 = 0")


@dataclass(frozen=True)
class Stack:
    """Layers ordered bottom to top.

    A termination of ``None`` is a free (stress-free) face; a Material is a
    semi-infinite half-space of that material.
    """

    layers: tuple[Layer, ...]
    area: float = DEFAULT_AREA
    top_termination: Optional[Material] = None
    bottom_termination: Optional[Material] = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        n_piezo = sum(layer.is_piezo_active for layer in self.layers)
        if n_piezo == 0:
            raise StackError("no active piezo layer")
        if n_piezo > 1:
            raise StackError("multiple active piezo layers")
        if not self.area > 0:
            raise StackError(f"area must be > 0, got {self.area}")
        if self.total_thickness >= MAX_TOTAL_THICKNESS:
            raise StackError(f"total thickness {self.total_thickness:.3g} m exceeds the 10 um thin-film bound")

    @property
    def piezo_index(self) -> int:
        return next(i for i, layer in enumerate(self.layers) if layer.is_piezo_active)

    @property
    def piezo(self) -> Layer:
        return self.layers[self.piezo_index]

    @property
    def below(self) -> tuple[Layer, ...]:
        """Layers under the piezo, ordered from the piezo outward."""
        return tuple(reversed(self.layers[: self.piezo_index]))

    @property
    def above(self) -> tuple[Layer, ...]:
        """Layers over the piezo, ordered from the piezo outward."""
        return self.layers[self.piezo_index + 1 :]

    @property
    def total_thickness(self) -> float:
        return math.fsum(layer.thickness for layer in self.layers)

    @property
    def interfaces(self) -> list[float]:
        """Positions of every internal interface, measured from the bottom face."""
        z, out = 0.0, []
        for layer in self.layers[:-1]:
            z += layer.thickness
            out.append(z)
        return out

    def reversed(self) -> "Stack":
        return replace(
            self,
            layers=tuple(reversed(self.layers)),
            top_termination=self.bottom_termination,
            bottom_termination=self.top_termination,
        )

    def with_thickness(self, index: int, thickness: float) -> "Stack":
        layers = list(self.layers)
        layers[index] = replace(layers[index], thickness=thickness)
        return replace(self, layers=tuple(layers))

    def split_layer(self, index: int) -> "Stack":
        """Replace one passive layer by two half-thickness copies."""
        layer = self.layers[index]
        if layer.is_piezo_active:
            raise StackError("cannot split the active piezo layer")
        half = replace(layer, thickness=layer.thickness / 2)
        layers = self.layers[:index] + (half, half) + self.layers[index + 1 :]
        return replace(self, layers=layers)


def _lookup(catalog: Mapping[str, Material], name: str, lineno: int) -> Material:
    try:
        return catalog[name]
    except KeyError:
        raise StackError(f"line {lineno}: unknown material {name!r}") from None


def parse_stack_text(text: str, catalog: Mapping[str, Material], name: str = "") -> Stack:
    layers: list[Layer] = []
    area = DEFAULT_AREA
    terms: dict[str, Optional[Material]] = {"top": None, "bottom": None}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        key = parts[0].lower()
        if key == "area_um2":
            if len(parts) != 2:
                raise StackError(f"line {lineno}: expected 'area_um2 <value>'")
            try:
                area = _scaled(parts[1], -12)
            except ValueError:
                raise StackError(f"line {lineno}: bad area {parts[1]!r}") from None
        elif key == "layer":
            if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3].lower() != "piezo"):
                raise StackError(f"line {lineno}: expected 'layer <material> <thickness_nm> [piezo]'")
            material = _lookup(catalog, parts[1], lineno)
            try:
                thickness = _scaled(parts[2], -9)
            except ValueError:
                raise StackError(f"line {lineno}: bad thickness {parts[2]!r}") from None
            if not thickness > 0:
                raise StackError(f"line {lineno}: thickness must be > 0, got {parts[2]} nm")
            try:
                layers.append(Layer(material, thickness, len(parts) == 4))
            except StackError as exc:
                raise StackError(f"line {lineno}: {exc}") from None
        elif key == "termination":
            if len(parts) != 3 or parts[1].lower() not in terms:
                raise StackError(f"line {lineno}: expected 'termination top|bottom free|<material>'")
            side, value = parts[1].lower(), parts[2]
            terms[side] = None if value.lower() == "free" else _lookup(catalog, value, lineno)
        else:
            raise StackError(f"line {lineno}: unknown directive {parts[0]!r}")
    if not layers:
        raise StackError("stack declares no layers")
    return Stack(tuple(layers), area, terms["top"], terms["bottom"], name=name)


def parse_stack(source: Union[str, Path], catalog: Mapping[str, Material]) -> Stack:
    path = Path(source)
    return parse_stack_text(path.read_text(), catalog, name=path.stem)


def _scaled(token: str, exponent: int) -> float:
    """Decimal ``token`` times 10**exponent, correctly rounded."""
    return float(Fraction(token) * Fraction(10) ** exponent)


def _token(value: float, exponent: int) -> str:
    # shortest repr shifted by whole decades, so _scaled() returns ``value`` exactly
    return format(Decimal(repr(value)).scaleb(-exponent).normalize(), "f")


def write_stack(stack: Stack) -> str:
    lines = [f"area_um2 {_token(stack.area, -12)}"]
    for layer in stack.layers:
        flag = " piezo" if layer.is_piezo_active else ""
        lines.append(f"layer {layer.material.name} {_token(layer.thickness, -9)}{flag}")
    for side, term in (("top", stack.top_termination), ("bottom", stack.bottom_termination)):
        lines.append(f"termination {side} {'free' if term is None else term.name}")
    return "\n".join(lines) + "\n"


def electrode_stack(
    catalog: Mapping[str, Material],
    top: str,
    bottom: str,
    electrode_thickness: float = QUARTET_ELECTRODE,
    piezo_thickness: float = QUARTET_PIEZO,
    piezo: str = QUARTET_PIEZO_MATERIAL,
    area: float = DEFAULT_AREA,
) -> Stack:
    """Electrode / piezo / electrode template, free on both faces."""
    missing = [n for n in (top, bottom, piezo) if n not in catalog]
    if missing:
        raise StackError(f"catalog lacks {', '.join(missing)}")
    layers = (
        Layer(catalog[bottom], electrode_thickness),
        Layer(catalog[piezo], piezo_thickness, True),
        Layer(catalog[top], electrode_thickness),
    )
    return Stack(layers, area, name=f"{top}-{bottom}")


QUARTET_IDS = ("Al-Al", "Pt-Al", "Al-Pt", "Pt-Pt")


def canonical_quartet(catalog: Mapping[str, Material]) -> dict[str, Stack]:
    """The four electrode combinations, keyed ``"<top>-<bottom>"``."""
    out = {}
    for key in QUARTET_IDS:
        top, bottom = key.split("-")
        out[key] = electrode_stack(catalog, top, bottom)
    return out


def bare_plate(material: Material, thickness: float = QUARTET_PIEZO, area: float = DEFAULT_AREA) -> Stack:
    return Stack((Layer(material, thickness, True),), area, name=f"bare-{material.name}")


def layer_names(layers: Sequence[Layer]) -> list[str]:
    return [layer.material.name for layer in layers]
