import numpy as np
import pytest

from scod import _accel, model, tasks


@pytest.fixture(params=["numba", "numpy"])
def kernel_path(request, monkeypatch):
    """Run a test once per kernel implementation."""
    if request.param == "numba" and not _accel.HAVE_NUMBA:
        pytest.skip("numba not installed")
    monkeypatch.setattr(_accel, "USE_NUMBA", request.param == "numba")
    return request.param


@pytest.fixture(scope="session")
def sine_task():
    spec = tasks.TaskSpec(kind=tasks.SINE, seed=0)
    data = tasks.generate(spec)
    config, family = tasks.default_model(spec.kind)
    w = model.train_sgd(config, *data["train"], family, 2000, 0.05, np.random.default_rng(0))
    return config, family, w, data


def random_net(rng, sizes, activation="relu"):
    config = model.ModelConfig(tuple(sizes), activation)
    return config, rng.standard_normal(config.n_weights) * 0.8


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture()
def acceptance_log(request):
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(line):
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
