"""Shared fixtures: a small deterministic catalog with known couples."""

import re

import pytest

CATALOG_HEADER = "id,origin_time,lat,lon,depth_km,mag"


def _cluster(rows, tag, year, month, lat, lon, mags=(5.3, 5.5), follow=5.9):
    """Two strong events 20 days apart and ~33 km apart, then a bigger
    follow event 60 days after the later one."""
    rows.append((f"{tag}a", f"{year}-{month:02d}-01T00:00:00Z", lat, lon, "", mags[0]))
    rows.append((f"{tag}b", f"{year}-{month:02d}-21T06:30:00Z", lat + 0.3, lon, "12", mags[1]))
    fm, fd = (month + 2, 20) if month <= 10 else (month - 2, 20)
    rows.append((f"{tag}f", f"{year}-{fm:02d}-{fd}T12:00:00Z", lat + 0.1, lon + 0.1, "", follow))


def demo_catalog_rows():
    rows = []
    # training-era couple clusters (before 1985)
    _cluster(rows, "t79", 1979, 3, 29.0, 50.0)
    _cluster(rows, "t80", 1980, 5, 30.0, 51.0, mags=(5.2, 5.6), follow=6.1)
    _cluster(rows, "t81", 1981, 7, 31.0, 49.5, mags=(5.4, 5.5), follow=5.7)
    _cluster(rows, "t82", 1982, 2, 29.5, 52.0, mags=(5.1, 5.3), follow=5.8)
    _cluster(rows, "t83", 1983, 6, 30.5, 50.5, mags=(5.3, 5.4), follow=6.0)
    _cluster(rows, "t84", 1984, 4, 31.5, 51.5, mags=(5.2, 5.5), follow=5.6)
    # test-era clusters (1985 through 1990)
    _cluster(rows, "s86", 1986, 3, 30.0, 50.0, mags=(5.3, 5.6), follow=6.2)
    _cluster(rows, "s87", 1987, 8, 29.5, 51.0, mags=(5.2, 5.4), follow=5.7)
    _cluster(rows, "s89", 1989, 5, 31.0, 50.5, mags=(5.5, 5.5), follow=5.9)
    # scattered background below the coupling cut
    for k, (year, month, day) in enumerate(
        [(1979, 9, 5), (1980, 11, 17), (1982, 8, 3), (1984, 10, 9),
         (1986, 11, 2), (1988, 2, 14), (1990, 6, 30), (1991, 1, 15)]
    ):
        rows.append(
            (f"bg{k}", f"{year}-{month:02d}-{day:02d}T03:00:00Z",
             28.5 + 0.2 * k, 48.0 + 0.5 * k, "", 4.0 + 0.1 * k)
        )
    rows.sort(key=lambda r: r[1])
    return rows


@pytest.fixture(scope="session")
def demo_catalog_text():
    lines = [CATALOG_HEADER]
    for ident, t, lat, lon, depth, mag in demo_catalog_rows():
        lines.append(f"{ident},{t},{lat},{lon},{depth},{mag}")
    return "\n".join(lines) + "\n"


@pytest.fixture
def demo_catalog(tmp_path, demo_catalog_text):
    path = tmp_path / "catalog.csv"
    path.write_text(demo_catalog_text)
    return path


_ACCEPTANCE_PATTERN = re.compile(r"test_a(\d+)_")


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    m = _ACCEPTANCE_PATTERN.search(report.nodeid)
    if m:
        status = "PASSED" if report.passed else "FAILED"
        print(f"\nACCEPTANCE A{m.group(1)}: {status}")
