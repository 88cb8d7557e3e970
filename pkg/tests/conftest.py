from __future__ import annotations

import random

import pytest

from pairsonic.modem import kernels
from pairsonic.wire import ContactCard

BACKENDS = kernels.available_backends()


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    """Each kernel module that is importable here (python, and cython when built)."""
    return BACKENDS[request.param]


@pytest.fixture
def rng():
    return random.Random(20240611)


def _make_card(i: int = 0) -> ContactCard:
    return ContactCard(f"User {i}", bytes([i]) * 32, ((b"phone", f"+1-555-{i:04d}".encode()),))


@pytest.fixture
def make_card():
    return _make_card


# ------------------------------------------------------ acceptance verdicts

_VERDICTS: list[str] = []


@pytest.fixture
def verdict(capsys):
    """Print and record one PASS/FAIL line for an acceptance criterion."""

    def emit(number: int, ok: bool, text: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}"
        _VERDICTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
