import numpy as np
import pytest

from hermite_beta.model import EnsembleParams, TridiagonalModel, sample_ensemble

_ACCEPTANCE_LINES = []


@pytest.fixture
def report_line():
    """Record one ``PASS``/``FAIL`` line for the acceptance summary."""

    def record(label: str, ok: bool, detail: str = ""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f": {detail}" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_model(n, beta=2.0, seed=0):
    return sample_ensemble(EnsembleParams(n, beta, seed))


def scaled_model(diag, off, beta=2.0):
    """Model whose scaled entries are exactly ``diag`` and ``off``."""
    r = np.sqrt(beta)
    return TridiagonalModel(np.asarray(diag, float) * r, np.asarray(off, float) * r, beta)
