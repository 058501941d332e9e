import numpy as np
import pytest

from symkernels.data import synthetic_cifar, write_cifar10

_acceptance_lines = []


def record_criterion(number, title, passed, detail=""):
    _acceptance_lines.append(
        f"criterion {number:>2} [{'PASS' if passed else 'FAIL'}] {title}" + (f" -- {detail}" if detail else "")
    )


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def synthetic_data_dir(tmp_path_factory):
    """CIFAR-10 binary batches filled with learnable synthetic images."""
    directory = tmp_path_factory.mktemp("cifar")
    train, test = synthetic_cifar(2500, 500, seed=3)
    write_cifar10(directory, train, test)
    return directory
