from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).resolve().parents[1] / "src" / "exactpert" / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def example_paths() -> list[Path]:
    return sorted(DATA.glob("*.json"))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def report(capsys):
    """Print one verdict line that stays visible under output capture."""

    def emit(criterion: int, passed: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[criterion {criterion:2d}] {'PASS' if passed else 'FAIL'}: {detail}")

    return emit
