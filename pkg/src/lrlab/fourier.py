"""Centered 2D DFT, diamond frequency-band masks and band-limited test sets.

Spectra are stored centered: row ``k + N//2`` holds frequency ``k`` for
``k`` in ``[-N//2, ceil(N/2) - 1]`` (likewise for columns). The forward
transform carries the ``1/(NM)`` factor, the inverse none.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FormatError, PreconditionError

# background / low / mid / high for 32x32 inputs
CIFAR_BANDS = {"0-0": (0, 0), "1-8": (1, 8), "9-24": (9, 24), "25-32": (25, 32)}
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class BandSpec:
    a: int
    c: int

    def __post_init__(self):
        if not (0 <= self.a <= self.c):
            raise PreconditionError(f"invalid band range {self.a}-{self.c}")

    @property
    def name(self) -> str:
        return f"{self.a}-{self.c}"

    @classmethod
    def parse(cls, text: str) -> "BandSpec":
        a, _, c = text.partition("-")
        return cls(int(a), int(c or a))


def band_groups(size: int = 32) -> list[BandSpec]:
    """The four band groups; the high group runs to the largest band of the grid."""
    return [BandSpec(0, 0), BandSpec(1, 8), BandSpec(9, 24), BandSpec(25, max_band(size, size))]


def max_band(n: int, m: int) -> int:
    return n // 2 + m // 2


def frequencies(n: int) -> np.ndarray:
    return np.arange(-(n // 2), (n + 1) // 2)


@dataclass
class SpectrumGrid:
    """Centered spectrum of one channel (2D) or a stack of channels (3D)."""
    values: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[-2:]

    def __getitem__(self, kl):
        k, l = kl
        n, m = self.shape
        return self.values[..., k + n // 2, l + m // 2]

    def band_index(self) -> np.ndarray:
        n, m = self.shape
        return np.abs(frequencies(n))[:, None] + np.abs(frequencies(m))[None, :]


def _basis(n: int, sign: float) -> np.ndarray:
    return np.exp(sign * 2j * np.pi * np.outer(frequencies(n), np.arange(n)) / n)


def dft2(x) -> SpectrumGrid:
    """``Y[k,l] = (1/NM) sum_{n,m} X[n,m] exp(-2 pi i (kn/N + lm/M))``.

    Accepts ``(N, M)`` or channel-stacked ``(C, N, M)`` arrays.
    """
    x = np.asarray(x, dtype=np.float64)
    n, m = x.shape[-2:]
    if n < 1 or m < 1:
        raise PreconditionError("image must be at least 1x1")
    y = _basis(n, -1.0) @ x @ _basis(m, -1.0).T / (n * m)
    return SpectrumGrid(y)


def band_mask(spec: SpectrumGrid, band: BandSpec) -> SpectrumGrid:
    b = spec.band_index()
    keep = (b >= band.a) & (b <= band.c)
    return SpectrumGrid(np.where(keep, spec.values, 0.0))


def idft2(spec: SpectrumGrid, tol: float = SYMMETRY_TOL) -> np.ndarray:
    """Inverse of ``dft2``; the imaginary residue must stay below ``tol``."""
    n, m = spec.shape
    # (kn) basis transposed: rows index n, columns index k
    x = _basis(n, 1.0).T @ spec.values @ _basis(m, 1.0)
    resid = float(np.max(np.abs(x.imag))) if x.size else 0.0
    if resid > tol * max(1.0, float(np.max(np.abs(x.real)))):
        raise FormatError(f"spectrum is not conjugate-symmetric (imaginary residue {resid:.3g})")
    return x.real.copy()


def band_image(x, band: BandSpec) -> np.ndarray:
    return idft2(band_mask(dft2(x), band))


# ---------------------------------------------------------------- images


@dataclass
class ImageRecord:
    label: int
    pixels: np.ndarray  # (C, N, M) floats


@dataclass
class ChannelStats:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, pixels: np.ndarray) -> np.ndarray:
        return (pixels - self.mean[:, None, None]) / self.std[:, None, None]


def channel_stats(images: Sequence[ImageRecord]) -> ChannelStats:
    stack = np.stack([im.pixels for im in images])
    return ChannelStats(stack.mean(axis=(0, 2, 3)), stack.std(axis=(0, 2, 3)))


def make_band_testset(images: Sequence[ImageRecord], band: BandSpec, stats: ChannelStats | None = None,
                      normalize: bool | None = None) -> list[ImageRecord]:
    """Band-limit every channel of every image.

    Per-channel normalization is applied by default only to the DC-only band
    (other bands have no mean left to remove); pass ``normalize`` to override.
    """
    if normalize is None:
        normalize = band.a == 0 and band.c == 0
    if normalize and stats is None:
        raise PreconditionError("normalization requested without channel statistics")
    out = []
    for im in images:
        px = idft2(band_mask(dft2(im.pixels), band))
        if normalize:
            px = stats.apply(px)
        out.append(ImageRecord(im.label, px))
    return out


def write_band_testset(path, images: Sequence[ImageRecord], band: BandSpec, normalized: bool) -> tuple[Path, Path]:
    """Raw little-endian float64 tensor ``(n, C, N, M)`` plus a JSON sidecar."""
    path = Path(path)
    data = np.stack([im.pixels for im in images]).astype("<f8")
    data.tofile(path)
    side = path.with_suffix(path.suffix + ".json")
    side.write_text(json.dumps({
        "shape": list(data.shape),
        "dtype": "float64-le",
        "band": [band.a, band.c],
        "normalized": bool(normalized),
        "labels": [int(im.label) for im in images],
    }, indent=1))
    return path, side


def read_band_testset(path) -> tuple[list[ImageRecord], dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    data = np.fromfile(path, dtype="<f8").reshape(meta["shape"])
    return [ImageRecord(lab, px) for lab, px in zip(meta["labels"], data)], meta


# ---------------------------------------------------------------- CIFAR-10 binary

CIFAR_RECORD = 1 + 3 * 32 * 32


def read_cifar10_binary(path) -> list[ImageRecord]:
    """Parse a CIFAR-10 binary batch: per record one label byte, then R, G, B planes."""
    raw = Path(path).read_bytes()
    if len(raw) % CIFAR_RECORD:
        raise FormatError(f"file size {len(raw)} is not a multiple of {CIFAR_RECORD}")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = arr[:, 0]
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise FormatError(f"record {bad} has label byte {labels[bad]} > 9")
    pixels = arr[:, 1:].reshape(-1, 3, 32, 32) / 255.0
    return [ImageRecord(int(lab), px) for lab, px in zip(labels, pixels)]


def write_cifar10_binary(path, images: Sequence[ImageRecord]) -> None:
    """Inverse of ``read_cifar10_binary``; pixels are rounded to bytes."""
    out = bytearray()
    for im in images:
        if not 0 <= im.label <= 9 or im.pixels.shape != (3, 32, 32):
            raise FormatError("CIFAR-10 records need a label in 0..9 and 3x32x32 pixels")
        out.append(im.label)
        out += np.clip(np.rint(im.pixels * 255.0), 0, 255).astype(np.uint8).tobytes()
    Path(path).write_bytes(bytes(out))


# ---------------------------------------------------------------- classifier glue


@dataclass
class ImageDataset:
    """Flattened, normalized two-class image subset usable by the sphere trainer."""
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    test_images: list
    stats: ChannelStats
    classes: tuple

    @property
    def n_classes(self) -> int:
        return len(self.classes)


def image_subset(train: Sequence[ImageRecord], test: Sequence[ImageRecord], classes=(0, 1),
                 n_train: int = 2000, n_test: int = 1000) -> ImageDataset:
    """Keep the first images of the chosen classes, relabel 0..k-1, normalize per channel."""
    remap = {c: i for i, c in enumerate(classes)}
    tr = [ImageRecord(remap[im.label], im.pixels) for im in train if im.label in remap][:n_train]
    te = [ImageRecord(remap[im.label], im.pixels) for im in test if im.label in remap][:n_test]
    if not tr or not te:
        raise PreconditionError("no images of the requested classes")
    stats = channel_stats(tr)

    def flat(ims):
        return np.stack([stats.apply(im.pixels).reshape(-1) for im in ims])

    return ImageDataset(flat(tr), np.array([im.label for im in tr]), flat(te),
                        np.array([im.label for im in te]), te, stats, tuple(classes))


def band_arrays(ds: ImageDataset, band: BandSpec, normalize: bool | None = None):
    """Flattened inputs and labels of the band-limited test set."""
    ims = make_band_testset(ds.test_images, band, ds.stats, normalize)
    return np.stack([im.pixels.reshape(-1) for im in ims]), np.array([im.label for im in ims])
