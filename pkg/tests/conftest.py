import numpy as np
import pytest

from sculptor.synth import generate_scene


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def scene3():
    """Three objects, noisy depth with 20% outliers."""
    return generate_scene(3, seed=7, noise=0.05, outlier_fraction=0.2)


@pytest.fixture(scope="session")
def clean_lshape():
    """Single off-grid L-shape, noiseless."""
    return generate_scene(1, seed=3, kinds=("lshape",), on_grid=False)


@pytest.fixture(scope="session")
def scene_dir(tmp_path_factory, scene3):
    from sculptor.sceneio import write_scene_dir

    return write_scene_dir(scene3, tmp_path_factory.mktemp("scene3"))


def pytest_runtest_logreport(report):
    if report.when == "call":
        for key, value in report.user_properties:
            if key == "acceptance":
                _ACCEPTANCE.append(value)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


_ACCEPTANCE = []
