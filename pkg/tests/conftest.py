from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "chromatch",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("chromatch")


def make_test_image(seed: int, height: int = 96, width: int = 96) -> np.ndarray:
    """Deterministic structured RGB image: colored blobs on a gradient.

    Structured (not pure noise) so segmentation produces a handful of
    coherent regions and correspondence has something to latch onto.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    r = 40.0 + 30.0 * np.sin(2 * np.pi * xx / width)
    g = 40.0 + 30.0 * np.cos(2 * np.pi * yy / height)
    b = np.full_like(xx, 60.0)
    n_blobs = int(rng.integers(3, 7))
    for _ in range(n_blobs):
        cy = rng.uniform(0, height)
        cx = rng.uniform(0, width)
        rad = rng.uniform(min(height, width) / 8, min(height, width) / 3)
        color = rng.uniform(30, 225, size=3)
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 < rad**2
        r[mask] = color[0]
        g[mask] = color[1]
        b[mask] = color[2]
    noise = rng.normal(0.0, 6.0, size=(height, width, 3))
    img = np.stack([r, g, b], axis=-1) + noise
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def make_selfref_image(seed: int, height: int = 96, width: int = 96) -> np.ndarray:
    """Image with textured luminance but smooth chrominance.

    Texture makes every cell's features distinctive (correspondence locks
    onto the right cell); smooth ab keeps cell-mean + bilinear resampling
    faithful, so self-reference runs can be scored tightly.
    """
    from chromatch.tensor_io import LabImage, lab_to_rgb

    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    lum = (
        50.0
        + 12.0 * np.sin(2 * np.pi * xx / width) * np.cos(2 * np.pi * yy / height)
        + rng.normal(0.0, 5.0, size=(height, width))
    )
    a = 18.0 * np.sin(2 * np.pi * xx / width + 1.0)
    b = 18.0 * np.cos(2 * np.pi * yy / height + 2.0)
    return lab_to_rgb(
        LabImage(
            L=np.clip(lum, 20, 80).astype(np.float32),
            a=a.astype(np.float32),
            b=b.astype(np.float32),
        )
    )


@pytest.fixture
def test_image():
    return make_test_image


# ---------------------------------------------------------------------------
# Acceptance criteria reporting: tests in test_acceptance.py print one
# PASS/FAIL line per criterion at the end of the run.
# ---------------------------------------------------------------------------

_ACCEPTANCE_RESULTS: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    if "test_acceptance" not in item.nodeid:
        return
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    status = "PASS" if report.passed else "FAIL"
    prev = _ACCEPTANCE_RESULTS.get(name)
    if prev != "FAIL":
        _ACCEPTANCE_RESULTS[name] = status


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): acceptance criterion covered by this test"
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in _ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{status}: {name}")
