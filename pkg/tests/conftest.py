import numpy as np
import pytest

from dbcscore import MlpModel, make_blobs

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus):
    if ACCEPTANCE_LINES:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion():
    """One pass/fail line per acceptance criterion, echoed in the summary."""
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line, flush=True)
        assert ok, line
    return record


@pytest.fixture(scope="session")
def blobs_2d():
    """Well-separated 2-D blobs, 200 per class."""
    return make_blobs(per_class=200, dimension=2, center_distance=10.0,
                      spread=1.0, seed=42)


@pytest.fixture(scope="session")
def linear_model_2d():
    """Hand-built linear classifier whose boundary is the line x0 = 0."""
    return MlpModel([2, 1], [np.array([[4.0, 0.0]])], [np.array([0.0])])


def make_zigzag_model(amplitude=1.5, period=2.0, sharpness=4.0):
    """Classifier whose boundary zigzags around x0 = 0.

    f(x) = sigmoid(s * (x0 - amplitude * triangle(x1))), a genuinely
    nonlinear boundary built from pure numpy so tests control its shape.
    """
    def f(points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        phase = points[:, 1] / period
        triangle = 2.0 * np.abs(2.0 * (phase - np.floor(phase + 0.5))) - 1.0
        z = sharpness * (points[:, 0] - amplitude * triangle)
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
    return f
