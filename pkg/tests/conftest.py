import numpy as np
import pytest

from cobweb4v.data import Dataset, write_idx

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def digits():
    """sklearn's bundled 8x8 digits scaled to [0, 1], quantized like IDX bytes."""
    from sklearn.datasets import load_digits

    d = load_digits()
    raw = np.round(d.images / 16.0 * 255).astype(np.uint8)
    return raw, d.target.astype(np.int64)


@pytest.fixture(scope="session")
def digits_dataset(digits):
    raw, labels = digits
    return Dataset(raw.reshape(len(raw), -1) / 255.0, labels, "digits", (8, 8))


@pytest.fixture
def digits_idx(tmp_path, digits):
    """The 8x8 digits written as an MNIST-style directory of IDX files."""
    raw, labels = digits
    n_train = 1400
    write_idx(tmp_path / "train-images-idx3-ubyte", raw[:n_train])
    write_idx(tmp_path / "train-labels-idx1-ubyte", labels[:n_train].astype(np.uint8))
    write_idx(tmp_path / "t10k-images-idx3-ubyte.gz", raw[n_train:], compress=True)
    write_idx(tmp_path / "t10k-labels-idx1-ubyte.gz", labels[n_train:].astype(np.uint8),
              compress=True)
    return tmp_path
