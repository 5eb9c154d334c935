"""
Frequency-domain robustness tools.

Fourier basis perturbations and error heatmaps indexed by centered 2D
frequency, plus the radially averaged power spectrum and the normalized
reciprocal spectrum used as an image's spectral signature.

DFT convention: unitary (norm="ortho"), DC shifted to the grid center.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import cv2
import numpy as np

from errors import DimensionError, SpectralError
from nn_core import evaluate

logger = logging.getLogger(__name__)

RECIPROCAL_GUARD = 1e-12


def freq_range(d):
    """Centered frequency indices for a dimension of size d"""
    return range(-(d // 2), d - d // 2)


def _wrap(k, d):
    return (k + d // 2) % d - d // 2


@dataclass
class FourierBasis:
    d1: int
    d2: int
    i: int
    j: int
    matrix: np.ndarray


def fourier_basis(d1, d2, i, j) -> FourierBasis:
    """Unit-Frobenius cosine whose DFT lives on (i, j) and (-i, -j)"""
    if i not in freq_range(d1) or j not in freq_range(d2):
        raise SpectralError(
            f"frequency ({i}, {j}) outside [{-(d1 // 2)}, {d1 - d1 // 2 - 1}] x "
            f"[{-(d2 // 2)}, {d2 - d2 // 2 - 1}]"
        )
    m = np.arange(d1)[:, None]
    n = np.arange(d2)[None, :]
    wave = np.cos(2.0 * np.pi * (i * m / d1 + j * n / d2))
    return FourierBasis(d1, d2, i, j, wave / np.linalg.norm(wave))


@dataclass
class PerturbSpec:
    eps: float
    # +1/-1 per channel (or one sign for all channels)
    r: object = 1.0
    per_channel: bool = True

    def __post_init__(self):
        if self.eps < 0:
            raise SpectralError(f"eps must be >= 0, got {self.eps}")


def perturbation_delta(basis: FourierBasis, spec: PerturbSpec, channels):
    r = np.broadcast_to(np.asarray(spec.r, dtype=np.float64), (channels,))
    return r[:, None, None] * spec.eps * basis.matrix[None]


def perturb(image, basis: FourierBasis, spec: PerturbSpec, value_range=(0.0, 1.0)):
    """image + r * eps * U per channel, clipped to the value range"""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[1:] != (basis.d1, basis.d2):
        raise DimensionError(
            "image does not match basis", expected=("C", basis.d1, basis.d2), actual=image.shape
        )
    out = image + perturbation_delta(basis, spec, image.shape[0])
    return np.clip(out, value_range[0], value_range[1]).astype(image.dtype)


@dataclass
class Heatmap:
    """Error rates on the centered frequency grid; grid[i + d1//2, j + d2//2]"""

    grid: np.ndarray
    eps: float
    model_id: str = ""

    @property
    def shape(self):
        return self.grid.shape

    def at(self, i, j):
        d1, d2 = self.grid.shape
        return float(self.grid[i + d1 // 2, j + d2 // 2])


def canonical_cell(i, j, d1, d2):
    """Representative of the conjugate pair {(i, j), (-i, -j)}"""
    return min((i, j), (_wrap(-i, d1), _wrap(-j, d2)))


def _cell_error(net, data, i, j, eps, seed):
    _, channels, d1, d2 = data.images.shape
    basis = fourier_basis(d1, d2, i, j)
    rng = np.random.default_rng([seed, i + d1 // 2, j + d2 // 2])
    r = rng.choice(np.array([-1.0, 1.0]), size=(len(data), channels))
    delta = r[:, :, None, None] * eps * basis.matrix[None, None]
    lo, hi = data.value_range
    perturbed = np.clip(data.images + delta, lo, hi).astype(data.images.dtype)
    return 1.0 - evaluate(net, data.with_images(perturbed))


def heatmap(net, data, eps, seed, workers=1, model_id="") -> Heatmap:
    """Fourier error heatmap; conjugate cells share one evaluation"""
    if data.images.ndim != 4:
        raise DimensionError("heatmap needs NCHW images", actual=data.images.shape)
    _, _, d1, d2 = data.images.shape
    cells = sorted(
        {canonical_cell(i, j, d1, d2) for i in freq_range(d1) for j in freq_range(d2)}
    )

    def work(cell):
        return _cell_error(net, data, cell[0], cell[1], eps, seed)

    if workers <= 1:
        errors = [work(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=min(workers, len(cells))) as executor:
            errors = list(executor.map(work, cells))
    by_cell = dict(zip(cells, errors))

    grid = np.empty((d1, d2), dtype=np.float64)
    for i in freq_range(d1):
        for j in freq_range(d2):
            grid[i + d1 // 2, j + d2 // 2] = by_cell[canonical_cell(i, j, d1, d2)]
    logger.info(
        f"Heatmap {model_id or 'model'} eps={eps}: {len(cells)} cells, "
        f"mean error {grid.mean():.4f}"
    )
    return Heatmap(grid, float(eps), model_id)


def diff_heatmap(h: Heatmap, baseline: Heatmap) -> Heatmap:
    if h.grid.shape != baseline.grid.shape:
        raise DimensionError("heatmap shapes differ", expected=baseline.grid.shape, actual=h.grid.shape)
    if h.eps != baseline.eps:
        raise SpectralError(f"eps mismatch: {h.eps} vs baseline {baseline.eps}")
    return Heatmap(h.grid - baseline.grid, h.eps, f"{h.model_id}-minus-{baseline.model_id}")


# ---------------------------------------------------------------------------
# radial spectrum and signatures
# ---------------------------------------------------------------------------

def radial_bins(d1, d2, full=False):
    """Per-pixel radius bin on the centered grid and the number of bins"""
    u = np.arange(d1) - d1 // 2
    v = np.arange(d2) - d2 // 2
    radius = np.rint(np.sqrt(u[:, None] ** 2 + v[None, :] ** 2)).astype(np.int64)
    nbins = int(radius.max()) + 1 if full else min(d1, d2) // 2 + 1
    return radius, nbins


def radial_bin_counts(d1, d2, full=False):
    radius, nbins = radial_bins(d1, d2, full)
    inside = radius < nbins
    return np.bincount(radius[inside], minlength=nbins)


def _plane(image):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3:
        image = image.mean(axis=0)
    if image.ndim != 2 or min(image.shape) < 2:
        raise DimensionError("spectrum needs an image of at least 2x2", actual=image.shape)
    return image


def power_spectrum_2d(image):
    plane = _plane(image)
    return np.abs(np.fft.fftshift(np.fft.fft2(plane, norm="ortho"))) ** 2


def radial_power_spectrum(image, full=False):
    """Mean |DFT|^2 per integer radius bin, channels averaged first.

    Bins run 0..floor(min(d1, d2)/2); ``full`` extends them to the corners.
    """
    power = power_spectrum_2d(image)
    radius, nbins = radial_bins(*power.shape, full=full)
    inside = radius < nbins
    sums = np.bincount(radius[inside], weights=power[inside], minlength=nbins)
    counts = np.bincount(radius[inside], minlength=nbins)
    return sums / counts


@dataclass
class SpectralSignature:
    values: np.ndarray
    normalized: bool = True


def signature(image) -> SpectralSignature:
    """Unit-norm reciprocal of the radial power spectrum"""
    recip = 1.0 / (radial_power_spectrum(image) + RECIPROCAL_GUARD)
    return SpectralSignature(recip / np.linalg.norm(recip), True)


def signatures(images):
    """Stacked signature vectors for a batch, one row per image"""
    return np.stack([signature(img).values for img in images])


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def heatmap_to_gray(h: Heatmap, signed=None):
    """8-bit image: v = floor(e * 255 + 0.5) for e in [0, 1]; difference
    heatmaps in [-1, 1] are shifted with e' = (e + 1) / 2 first."""
    signed = bool((h.grid < 0).any()) if signed is None else signed
    values = (h.grid + 1.0) / 2.0 if signed else h.grid
    return np.clip(np.floor(values * 255.0 + 0.5), 0, 255).astype(np.uint8)


def write_heatmap_csv(h: Heatmap, path):
    d1, d2 = h.grid.shape
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["i", "j", "error"])
        for i in freq_range(d1):
            for j in freq_range(d2):
                writer.writerow([i, j, f"{h.at(i, j):.6f}"])


def write_heatmap_pgm(h: Heatmap, path, signed=None):
    if not cv2.imwrite(str(path), heatmap_to_gray(h, signed)):
        raise OSError(f"Could not write {path}")


def write_heatmap_png(h: Heatmap, path, scale=16, signed=None):
    """Colour-mapped, enlarged rendering for eyeballing"""
    gray = heatmap_to_gray(h, signed)
    coloured = cv2.applyColorMap(gray, cv2.COLORMAP_JET)
    d1, d2 = gray.shape
    big = cv2.resize(coloured, (d2 * scale, d1 * scale), interpolation=cv2.INTER_NEAREST)
    if not cv2.imwrite(str(path), big):
        raise OSError(f"Could not write {path}")


def write_signature_csv(rows, path):
    """rows: iterable of (label, vector)"""
    rows = list(rows)
    width = len(rows[0][1]) if rows else 0
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["label"] + [f"bin{k}" for k in range(width)])
        for label, values in rows:
            writer.writerow([label] + [f"{v:.12g}" for v in values])


def mean_radial_spectrum(images):
    """Average radial spectrum over a batch; what the spectra command reports"""
    spectra = [radial_power_spectrum(img) for img in images]
    return np.mean(spectra, axis=0) if spectra else np.zeros(0)
