import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbarsim.stack import (
    QUARTET_IDS,
    Layer,
    Stack,
    StackError,
    bare_plate,
    canonical_quartet,
    electrode_stack,
    parse_stack,
    parse_stack_text,
    write_stack,
)

TEXT = """\
area_um2 154
layer Pt 45      # bottom
layer Sc0.3Al0.7N 85 piezo
layer Al 45
termination top free
termination bottom Si
"""


def test_parse_stack_text(catalog):
    s = parse_stack_text(TEXT, catalog)
    assert [layer.material.name for layer in s.layers] == ["Pt", "Sc0.3Al0.7N", "Al"]
    assert s.piezo_index == 1
    assert s.area == pytest.approx(154e-12)
    assert s.top_termination is None and s.bottom_termination.name == "Si"
    assert s.total_thickness == pytest.approx(175e-9)
    assert s.interfaces == pytest.approx([45e-9, 130e-9])
    assert [layer.material.name for layer in s.below] == ["Pt"]
    assert [layer.material.name for layer in s.above] == ["Al"]


def test_parse_stack_file(tmp_path, catalog):
    p = tmp_path / "dev.stack"
    p.write_text(TEXT)
    s = parse_stack(p, catalog)
    assert s.name == "dev"


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("layer Al 45\n", "no active piezo"),
        ("layer Sc0.3Al0.7N 85 piezo\nlayer AlN 10 piezo\n", "multiple"),
        ("layer Unobtainium 45\n", "line 1: unknown material"),
        ("layer Al -3\n", "line 1: thickness must be > 0"),
        ("layer Al 45\nlayer Al 85 piezo\n", "line 2: .*e33 = 0"),
        ("layer Sc0.3Al0.7N 20000 piezo\n", "10 um"),
        ("frobnicate 3\n", "unknown directive"),
        ("", "no layers"),
        ("area_um2 0\nlayer Sc0.3Al0.7N 85 piezo\n", "area"),
    ],
)
def test_parse_errors(catalog, text, fragment):
    with pytest.raises(StackError, match=fragment):
        parse_stack_text(text, catalog)


def test_quartet_layout(catalog):
    q = canonical_quartet(catalog)
    assert tuple(q) == QUARTET_IDS
    pt_al = q["Pt-Al"]
    assert pt_al.layers[2].material.name == "Pt"  # top
    assert pt_al.layers[0].material.name == "Al"
    assert pt_al.piezo.thickness == pytest.approx(85e-9)
    assert pt_al.area == pytest.approx(14e-6 * 11e-6)


def test_reverse_and_split(catalog):
    s = electrode_stack(catalog, "Pt", "Al")
    r = s.reversed()
    assert r.layers == tuple(reversed(s.layers))
    assert r.reversed() == s
    split = s.split_layer(0)
    assert len(split.layers) == 4
    assert split.total_thickness == pytest.approx(s.total_thickness, rel=1e-15)
    with pytest.raises(StackError):
        s.split_layer(1)


def test_bare_plate(catalog):
    s = bare_plate(catalog["Sc0.3Al0.7N"])
    assert len(s.layers) == 1 and s.piezo.is_piezo_active


thick_nm = st.floats(1, 2000, allow_nan=False)


@given(st.lists(st.tuples(st.sampled_from(["Al", "Pt", "SiO2", "Si"]), thick_nm), max_size=4), thick_nm,
       st.floats(1, 1e5))
def test_write_parse_roundtrip_exact(catalog_names, piezo_nm, area_um2):
    from fbarsim.materials import default_catalog

    catalog = default_catalog()
    layers = [Layer(catalog[n], t * 1e-9) for n, t in catalog_names]
    layers.insert(len(layers) // 2, Layer(catalog["Sc0.3Al0.7N"], piezo_nm * 1e-9, True))
    s = Stack(tuple(layers), area_um2 * 1e-12)
    assert parse_stack_text(write_stack(s), catalog) == s
