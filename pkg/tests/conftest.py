import time

import numpy as np
import pytest

from d2ea import pipeline

ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_run():
    """Seed-42 generate + split + train with the default settings."""
    t0 = time.perf_counter()
    sim, exp = pipeline.generate(pipeline.DEFAULT_SEED)
    pools = pipeline.split_pools(sim, exp, pipeline.DEFAULT_SEED)
    comp = pipeline.train(pools)
    elapsed = time.perf_counter() - t0
    return {"sim": sim, "exp": exp, "pools": pools, "comp": comp, "elapsed": elapsed}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
