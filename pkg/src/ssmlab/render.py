"""Deterministic PNG heat maps of atomic measures and scan grids."""
from __future__ import annotations

import io

import numpy as np
from PIL import Image

from .measure import DiscreteMeasure

MAX_PIXELS = 4096

# 16 viridis anchors, interpolated to 256 entries
_ANCHORS = np.array([
    [68, 1, 84], [72, 26, 108], [71, 47, 125], [65, 68, 135], [57, 86, 140], [49, 104, 142],
    [42, 120, 142], [35, 136, 142], [31, 152, 139], [34, 168, 132], [53, 183, 121], [84, 197, 104],
    [122, 209, 81], [165, 219, 54], [210, 226, 27], [253, 231, 37],
], dtype=float)
PALETTE = np.stack([np.interp(np.linspace(0, 15, 256), np.arange(16), _ANCHORS[:, c]) for c in range(3)], axis=1).round().astype(np.uint8)
BACKGROUND = np.array([0, 0, 0], dtype=np.uint8)


def _png(rgb: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG", optimize=False, compress_level=6)
    return buf.getvalue()


def colorize(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to the palette where mask holds; background elsewhere."""
    idx = np.clip((values * 255).round(), 0, 255).astype(np.int64)
    rgb = np.empty(values.shape + (3,), dtype=np.uint8)
    rgb[:] = BACKGROUND
    rgb[mask] = PALETTE[idx[mask]]
    return rgb


def mass_histogram(mu: DiscreteMeasure, resolution: int) -> tuple[np.ndarray, tuple[float, float, float, float]]:
    """Mass per pixel over the bounding box of the support plus a 5% margin (row 0 at the top)."""
    if len(mu) == 0:
        raise ValueError("cannot render an empty measure")
    if not 1 <= resolution <= MAX_PIXELS:
        raise ValueError(f"resolution must lie in [1, {MAX_PIXELS}]")
    x, y = mu.atoms.real, mu.atoms.imag
    x0, x1, y0, y1 = x.min(), x.max(), y.min(), y.max()
    side = max(x1 - x0, y1 - y0)
    if side == 0:
        side = 1.0
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    half = side * 1.05 / 2
    box = (cx - half, cx + half, cy - half, cy + half)
    col = np.clip(((x - box[0]) / (2 * half) * resolution).astype(np.int64), 0, resolution - 1)
    row = np.clip(((box[3] - y) / (2 * half) * resolution).astype(np.int64), 0, resolution - 1)
    hist = np.zeros((resolution, resolution))
    np.add.at(hist, (row, col), mu.probabilities)
    return hist, box


def render_measure(mu: DiscreteMeasure, resolution: int = 512) -> bytes:
    """Log-scaled mass histogram as PNG bytes; identical inputs give identical bytes."""
    hist, _ = mass_histogram(mu, resolution)
    lit = hist > 0
    vals = np.zeros_like(hist)
    if lit.any():
        lg = np.log(hist[lit])
        lo, hi = lg.min(), lg.max()
        vals[lit] = 1.0 if hi == lo else (lg - lo) / (hi - lo)
    return _png(colorize(vals, lit))


def occupancy_fraction(mu: DiscreteMeasure, resolution: int = 512) -> float:
    """Lit pixels over pixels of the support's bounding box."""
    hist, box = mass_histogram(mu, resolution)
    x, y = mu.atoms.real, mu.atoms.imag
    scale = resolution / (box[1] - box[0])
    c0, c1 = int((x.min() - box[0]) * scale), int((x.max() - box[0]) * scale)
    r0, r1 = int((box[3] - y.max()) * scale), int((box[3] - y.min()) * scale)
    sub = hist[r0 : r1 + 1, c0 : c1 + 1]
    return float((sub > 0).mean())


def render_grid(values: np.ndarray, mask: np.ndarray | None = None) -> bytes:
    """Heat map of a 2-d array scaled to [0, 1] (row 0 drawn at the bottom)."""
    v = np.asarray(values, dtype=float)
    m = np.isfinite(v) if mask is None else np.asarray(mask, dtype=bool) & np.isfinite(v)
    out = np.zeros_like(v)
    if m.any():
        lo, hi = v[m].min(), v[m].max()
        out[m] = 0.5 if hi == lo else (v[m] - lo) / (hi - lo)
    return _png(colorize(out[::-1], m[::-1]))
