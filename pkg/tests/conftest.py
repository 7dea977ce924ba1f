import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vatscm.panel import MonthKey, Panel, PriceSeries, StudyDesign


def make_panel(treated, donors: dict, design: StudyDesign | None = None, start: MonthKey | None = None) -> Panel:
    """Panel from plain value lists; all series start at ``design.pre_start``."""
    if design is None:
        n = len(treated)
        design = StudyDesign.from_pre_window(MonthKey(2023, 1), MonthKey(2023, 1).shift(n - 2), MonthKey(2023, 1).shift(n - 1))
    start = start or design.pre_start
    return Panel(
        PriceSeries.from_values("TR", "treated", start, treated),
        tuple(PriceSeries.from_values(k, k, start, v) for k, v in donors.items()),
        design,
    )


@pytest.fixture
def design():
    return StudyDesign.default()


@pytest.fixture
def short_design():
    # 3 pre-months, 2 post-months
    return StudyDesign.from_pre_window(MonthKey(2023, 1), MonthKey(2023, 3), MonthKey(2023, 5))


@pytest.fixture
def rng():
    return np.random.default_rng(20240107)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
