import os
from pathlib import Path

import numpy as np
import pytest

from qrobust import data


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def _has_mnist(path) -> bool:
    try:
        for split in ("train", "test"):
            for name in {"train": data.TRAIN_FILES, "test": data.TEST_FILES}[split]:
                data._find(Path(path), name)
    except FileNotFoundError:
        return False
    return True


def write_mnist_subset(directory: Path, seed: int = 0) -> Path:
    """Write train/t10k IDX pairs from the 5000-image MNIST sample bundled with mlxtend.

    Each digit class is split 400 train / 100 test, so the 0/1 subset has 800
    training and 200 test images.
    """
    mlx = pytest.importorskip("mlxtend.data")
    x, y = mlx.mnist_data()
    pixels = x.reshape(-1, 28, 28).astype(np.uint8)
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for digit in range(10):
        idx = rng.permutation(np.flatnonzero(y == digit))
        cut = int(round(0.8 * len(idx)))
        train_idx += idx[:cut].tolist()
        test_idx += idx[cut:].tolist()
    directory.mkdir(parents=True, exist_ok=True)
    for names, idx in ((data.TRAIN_FILES, train_idx), (data.TEST_FILES, test_idx)):
        idx = rng.permutation(idx)
        imgs = [data.RawImage(pixels[i], int(y[i])) for i in idx]
        data.write_idx(imgs, directory / names[0], directory / names[1])
    return directory


@pytest.fixture(scope="session")
def mnist_dir(tmp_path_factory):
    env = os.environ.get("QROBUST_DATA_DIR")
    if env and _has_mnist(env):
        return Path(env)
    return write_mnist_subset(tmp_path_factory.mktemp("mnist"))


ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(name: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
