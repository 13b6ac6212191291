import math

import numpy as np
import pytest

import walktail.bounds as bounds_mod
import walktail.oracle as oracle_mod


@pytest.fixture
def weak_delta(monkeypatch):
    """Mutant: the dependence term loses its e^{2r} factor everywhere it is used."""
    def scalar(x, r, V):
        num = 4 * x * math.expm1(r) ** 2
        return 0.0 if num == 0 else num / (1 - bounds_mod.delta(x, r, V))

    def vector(x, r, V):
        r = np.asarray(r, dtype=float)
        num = 4 * x * np.expm1(r) ** 2
        d = bounds_mod.delta(x, r, V)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(d < 1, num / (1 - d), np.inf)
        return np.where(num == 0, 0.0, out)

    monkeypatch.setattr(bounds_mod, "big_delta", scalar)
    monkeypatch.setattr(bounds_mod, "_big_delta_array", vector)
    monkeypatch.setattr(oracle_mod, "big_delta", scalar)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """``with criterion(k, text): ...`` records one PASS/FAIL line for the terminal summary."""
    from contextlib import contextmanager

    @contextmanager
    def record(k, text):
        try:
            yield
        except BaseException as exc:
            ACCEPTANCE_LINES.append((k, f"FAIL criterion {k}: {text} ({type(exc).__name__}: {exc})"[:400]))
            raise
        ACCEPTANCE_LINES.append((k, f"PASS criterion {k}: {text}"))

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
