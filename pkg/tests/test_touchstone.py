import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbarsim.touchstone import (
    NetworkData,
    TouchstoneError,
    format_touchstone,
    network_from_admittance,
    parse_touchstone,
    read_touchstone,
    s_from_abcd,
    to_device_admittance,
    write_touchstone,
)


def test_ri_one_port_line():
    net = parse_touchstone("# GHz S RI R 50\n1.0 0.5 0.0\n", 1)
    assert net.frequencies[0] == 1e9
    assert net.s[0, 0, 0] == 0.5 + 0j
    assert net.z0 == 50


def test_db_entry():
    net = parse_touchstone("! comment\n# MHz S DB R 50\n1000 -6.0205999 0\n", 1)
    assert net.frequencies[0] == pytest.approx(1e9)
    assert abs(net.s[0, 0, 0]) == pytest.approx(0.5, rel=1e-8)
    assert np.angle(net.s[0, 0, 0]) == 0


def test_ma_entry():
    net = parse_touchstone("# Hz S MA R 50\n1.0 1.0 90\n", 1)
    assert net.s[0, 0, 0] == pytest.approx(1j, abs=1e-15)


def test_option_defaults_and_case():
    net = parse_touchstone("#\n2 0.5 45\n", 1)  # GHz, MA, 50 ohm
    assert net.frequencies[0] == 2e9 and net.z0 == 50
    net = parse_touchstone("# khz s ri r 75\n1 0 0\n", 1)
    assert net.frequencies[0] == 1e3 and net.z0 == 75


def test_two_port_column_order():
    text = "# GHz S RI R 50\n1 0.11 0 0.21 0 0.12 0 0.22 0\n"
    s = parse_touchstone(text, 2).s[0]
    assert s[0, 0] == 0.11 and s[1, 0] == 0.21 and s[0, 1] == 0.12 and s[1, 1] == 0.22


@pytest.mark.parametrize(
    "text, ports, fragment",
    [
        ("1 0.5 0\n", 1, "1: data before"),
        ("! only a comment\n", 1, "missing '#' option line"),
        ("", 1, "missing"),
        ("# GHz S RI R 50\n1 0.5 0\n1 0.4 0\n", 1, "3: frequencies must be strictly increasing"),
        ("# GHz S RI R 50\n1 0.5\n", 1, "2: expected 3 columns"),
        ("# GHz S RI R 50\n1 0.5 0 0 0\n", 2, "2: expected 9 columns"),
        ("# GHz Y RI R 50\n1 0.5 0\n", 1, "only S-parameter"),
        ("# GHz S XY R 50\n1 0.5 0\n", 1, "unknown option"),
        ("[Version] 2.0\n# GHz S RI R 50\n", 1, "v2 keyword"),
        ("# GHz S RI R 50\n1 a 0\n", 1, "2: non-numeric"),
        ("# GHz S RI R 50\n", 1, "no data"),
    ],
)
def test_parse_errors(text, ports, fragment):
    with pytest.raises(TouchstoneError, match=fragment):
        parse_touchstone(text, ports)


def test_file_suffix(tmp_path):
    p = tmp_path / "dev.s3p"
    p.write_text("# GHz S RI R 50\n")
    with pytest.raises(TouchstoneError, match="s1p or .s2p"):
        read_touchstone(p)


def test_matched_and_open_one_port():
    f = [1e9, 2e9]
    matched = NetworkData(f, np.zeros(2), 50)
    np.testing.assert_allclose(to_device_admittance(matched).y, 1 / 50)
    opened = NetworkData(f, np.ones(2), 50)
    np.testing.assert_allclose(to_device_admittance(opened).y, 0, atol=1e-18)
    shorted = NetworkData(f, -np.ones(2), 50)
    with pytest.raises(TouchstoneError, match="singular"):
        to_device_admittance(shorted)


def test_topology_port_mismatch():
    one = NetworkData([1e9], np.zeros(1))
    with pytest.raises(TouchstoneError):
        to_device_admittance(one, "series_thru")
    two = network_from_admittance([1e9], [1e-3])
    with pytest.raises(TouchstoneError):
        to_device_admittance(two, "one_port")
    assert to_device_admittance(two).meta["topology"] == "series_thru"
    assert to_device_admittance(two).provenance == "measured"


def test_abcd_of_thru_is_identity_s():
    abcd = np.broadcast_to(np.eye(2, dtype=complex), (3, 2, 2))
    np.testing.assert_allclose(s_from_abcd(abcd), np.broadcast_to([[0, 1], [1, 0]], (3, 2, 2)), atol=1e-15)


ys = st.lists(st.tuples(st.floats(1e-6, 1.0), st.floats(-1.0, 1.0)), min_size=1, max_size=8)


@pytest.mark.parametrize("topology", ["one_port", "series_thru", "shunt_thru"])
@given(values=ys, z0=st.sampled_from([25.0, 50.0, 75.0]))
def test_synthetic_embedding_roundtrip(topology, values, z0):
    y = np.array([complex(g, b) for g, b in values])
    f = np.arange(1, len(y) + 1) * 1e9
    back = to_device_admittance(network_from_admittance(f, y, topology, z0), topology).y
    np.testing.assert_allclose(back, y, rtol=1e-9)


smat = st.lists(st.tuples(st.floats(1e-3, 2.0), st.floats(-179.9, 179.9)), min_size=4, max_size=4)


@given(st.lists(smat, min_size=1, max_size=5))
def test_format_invariance(points):
    s = np.array([[complex(m * np.cos(np.deg2rad(a)), m * np.sin(np.deg2rad(a))) for m, a in p] for p in points])
    net = NetworkData(np.arange(1, len(points) + 1) * 1e9, s.reshape(-1, 2, 2), 50.0)
    parsed = [parse_touchstone(format_touchstone(net, fmt, "MHz", digits=17), 2).s for fmt in ("RI", "MA", "DB")]
    for p in parsed[1:]:
        np.testing.assert_allclose(p, parsed[0], rtol=1e-9, atol=1e-12)


def test_write_read_file(tmp_path):
    y = np.array([1e-3 + 2e-3j, 5e-4 - 1e-3j])
    net = network_from_admittance([1e9, 2e9], y)
    path = tmp_path / "dev.s2p"
    write_touchstone(net, path, "DB")
    back = read_touchstone(path)
    np.testing.assert_allclose(back.s, net.s, rtol=1e-10, atol=1e-12)
    with pytest.raises(TouchstoneError):
        write_touchstone(net, tmp_path / "dev.s1p")
