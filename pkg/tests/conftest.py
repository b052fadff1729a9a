import pytest

from hesseflat.run import PipelineConfig, run_pipeline


@pytest.fixture(scope="session")
def free_run():
    """phi = 1/2 with the single mode cos(theta) cos(t)."""
    return run_pipeline(PipelineConfig(profile="1/2", modes=[(1, 0, 1)]))


@pytest.fixture(scope="session")
def quad_run():
    return run_pipeline(PipelineConfig(profile="1/2 + u^2/8",
                                       modes=[(1, 0, 1), (0, 0.5, 2)]))


def pytest_terminal_summary(terminalreporter):
    lines = [value for key in ("passed", "failed")
             for rep in terminalreporter.stats.get(key, [])
             if rep.when == "call"
             for name, value in rep.user_properties if name == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split("criterion ")[1][:1]):
            terminalreporter.write_line(line)
