import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def textured_frame(h=240, w=320, seed=0):
    """Smooth random RGB frame, uint8."""
    from scipy import ndimage
    r = np.random.default_rng(seed)
    img = ndimage.gaussian_filter(r.standard_normal((h, w, 3)), sigma=(3, 3, 0))
    img = (img - img.min()) / (img.max() - img.min())
    return np.rint(40 + 180 * img).astype(np.uint8)


def paste_target(frame, x, y, size=64, seed=1):
    """Blocky random target with top-left corner (x, y)."""
    r = np.random.default_rng(seed)
    blocks = r.uniform(0, 255, (8, 8, 3))
    tile = np.kron(blocks, np.ones((size // 8, size // 8, 1)))
    out = frame.copy()
    out[y:y + size, x:x + size] = np.rint(tile).astype(np.uint8)
    return out


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
