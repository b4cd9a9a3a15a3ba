import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def brute_gaussian(f, sigma):
    """Direct periodic double sum with the same truncated kernel."""
    from mbeseg.field import gaussian_weights

    offsets, w = gaussian_weights(sigma)
    rows, cols = f.shape
    out = np.zeros_like(f)
    for j in range(rows):
        for i in range(cols):
            acc = 0.0
            for a, dy in enumerate(offsets):
                for b, dx in enumerate(offsets):
                    acc += w[a, b] * f[(j - dy) % rows, (i - dx) % cols]
            out[j, i] = acc
    return out


#: criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if passed else 'FAIL'}  {detail}")
