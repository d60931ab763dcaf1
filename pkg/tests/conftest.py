from pathlib import Path

import pytest

from wfsim import Binormal, CohortSpec, example_config_path, generate_cohort

DATA_DIR = Path(str(example_config_path())).parent


@pytest.fixture
def example_config():
    return Path(str(example_config_path()))


@pytest.fixture(scope="session")
def small_cohort():
    # 20 patients/day for 30 days, AUROC 0.85
    return generate_cohort(CohortSpec(20, 30, 0.2, 0.5, Binormal.from_auroc(0.85), seed=5))


# acceptance criteria register here; printed as a block at the end of the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
