import numpy as np
import pytest
import skimage.data

from lrlab.fourier import ImageRecord, write_cifar10_binary

SOURCES = ("astronaut", "chelsea", "coffee", "rocket", "immunohistochemistry", "hubble_deep_field",
           "retina", "colorwheel")


def real_crops(n, seed=0, size=32):
    """``n`` RGB crops (C, size, size) in [0, 1] from the photographs bundled with scikit-image."""
    rng = np.random.default_rng(seed)
    photos = [getattr(skimage.data, name)() for name in SOURCES]
    out = []
    for k in range(n):
        img = photos[k % len(photos)]
        r = rng.integers(0, img.shape[0] - size)
        c = rng.integers(0, img.shape[1] - size)
        out.append(img[r:r + size, c:c + size, :3].transpose(2, 0, 1) / 255.0)
    return out


@pytest.fixture(scope="session")
def crops():
    return real_crops(100)


@pytest.fixture(scope="session")
def cifar_batch(tmp_path_factory):
    """A full-size 10000-record batch file in the CIFAR-10 binary layout, built from real crops."""
    path = tmp_path_factory.mktemp("cifar") / "data_batch_1.bin"
    imgs = real_crops(10000, seed=1)
    labels = np.random.default_rng(2).integers(0, 10, 10000)
    write_cifar10_binary(path, [ImageRecord(int(l), px) for l, px in zip(labels, imgs)])
    return path, labels


# ---------------------------------------------------------------- acceptance bookkeeping

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_addoption(parser):
    parser.addoption("--budget-scale", type=float, default=1.0,
                     help="scale pretrain/finetune steps of the acceptance sweep")
    parser.addoption("--acceptance-dir", default=None,
                     help="reuse (and resume) the acceptance sweep in this directory")


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail)`` records a pass/fail line and then asserts ``ok``."""

    def record(n, ok, detail=""):
        ACCEPTANCE[n] = (bool(ok), detail)
        print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
