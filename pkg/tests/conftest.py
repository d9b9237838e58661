import math
from dataclasses import replace

import pytest
from hypothesis import settings

from fbarsim.materials import default_catalog
from fbarsim.modes import analyze_modes
from fbarsim.stack import canonical_quartet

settings.register_profile("fbarsim", deadline=None, max_examples=60)
settings.load_profile("fbarsim")


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def lossless_catalog(catalog):
    return {k: replace(m, mech_q=math.inf) for k, m in catalog.items()}


@pytest.fixture(scope="session")
def quartet(catalog):
    return canonical_quartet(catalog)


@pytest.fixture(scope="session")
def quartet_modes(quartet):
    return {k: analyze_modes(s) for k, s in quartet.items()}


# --- acceptance summary ---------------------------------------------------

_CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion and assert it."""

    def record(key: str, ok: bool, detail: str):
        _CRITERIA[key] = (bool(ok), detail)
        print(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")
        assert ok, f"{key}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: int(k.split()[0][1:])):
        ok, detail = _CRITERIA[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")
