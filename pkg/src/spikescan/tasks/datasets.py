"""Synthetic signal and image generators for the task experiments.

Dataset A is i.i.d. Gaussian noise per timestep.  Dataset B enumerates four
signal families over fixed parameter grids (the grid notation [a:b:c] means
c evenly spaced values from a to b): sine waves, sigmoid ramps, step edges
and Poisson-style threshold encodings, 200 samples each.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import Tensor


@dataclass(frozen=True)
class SignalSpec:
    kind: str
    params: tuple
    length: int = 128


def gen_dataset_a(n: int, T: int = 128, mu: float = 1.0, sigma: float = 2.0,
                  seed: int = 0) -> Tensor:
    """(n, 1, T) i.i.d. normal draws, bit-reproducible per seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    return Tensor(rng.normal(mu, sigma, size=(n, 1, T)))


def _grid(a: float, b: float, c: int) -> np.ndarray:
    return np.linspace(a, b, c)


def dataset_b_specs(T: int = 128) -> list[SignalSpec]:
    """The full 800-spec grid: 200 per signal family."""
    specs: list[SignalSpec] = []
    for amp in _grid(-2, 3, 5):
        for off in _grid(-2, 3, 8):
            for cyc in _grid(5, 15, 5):
                specs.append(SignalSpec("sine", (amp, off, cyc), T))
    for amp in _grid(-2, 5, 10):
        for off in _grid(10, 10, 20):
            specs.append(SignalSpec("sigmoid", (amp, off), T))
    for amp in _grid(-2, 5, 10):
        for edge in _grid(0, T, 20):
            specs.append(SignalSpec("step", (amp, edge), T))
    for amp in _grid(-1, 5, 5):
        for p0 in _grid(0.3, 1, 5):
            for _ in range(8):
                specs.append(SignalSpec("poisson", (amp, p0), T))
    return specs


def render_signal(spec: SignalSpec, rng: np.random.Generator) -> np.ndarray:
    x = np.arange(spec.length, dtype=np.float64)
    T = spec.length
    if spec.kind == "sine":
        amp, off, cyc = spec.params
        omega = 2.0 * np.pi * (cyc - 1.0) / (T - 1.0)
        return amp * np.sin(omega * x) + off
    if spec.kind == "sigmoid":
        amp, off = spec.params
        z = 20.0 * x / (T - 1.0) - 10.0 + off
        return amp / (1.0 + np.exp(-z))
    if spec.kind == "step":
        amp, edge = spec.params
        return amp * (x - edge >= 0.0).astype(np.float64)
    if spec.kind == "poisson":
        amp, p0 = spec.params
        draws = rng.uniform(0.0, 1.0, size=T)
        return amp * (draws - p0 >= 0.0).astype(np.float64)
    raise ValueError(f"unknown signal kind {spec.kind!r}")


def gen_dataset_b(seed: int = 0, T: int = 128):
    """(samples (800, 1, T), kinds list) over the fixed grids."""
    rng = np.random.default_rng(seed)
    specs = dataset_b_specs(T)
    data = np.stack([render_signal(s, rng) for s in specs])[:, None, :]
    return Tensor(data), [s.kind for s in specs]


def split_train_test(n: int, test_fraction: float, seed: int):
    """Shuffled index split; the test block is the first fraction of the
    permutation."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_test = max(1, int(round(n * test_fraction)))
    return np.sort(order[n_test:]), np.sort(order[:n_test])


# ---------------------------------------------------------------------------
# stationary wave mixtures for the extrapolation task


def gen_wave_mixtures(n: int, T: int, seed: int = 0,
                      components: int = 3, noise: float = 0.02) -> Tensor:
    """(n, 1, T) sums of random sinusoids; statistics independent of length,
    so longer sequences probe extrapolation rather than drift."""
    rng = np.random.default_rng(seed)
    t = np.arange(T, dtype=np.float64)
    out = np.zeros((n, T))
    for i in range(n):
        amps = rng.uniform(0.2, 1.0, components)
        freqs = rng.uniform(1.0 / 64.0, 1.0 / 8.0, components)
        phases = rng.uniform(0.0, 2.0 * np.pi, components)
        out[i] = sum(a * np.sin(2.0 * np.pi * f * t + p)
                     for a, f, p in zip(amps, freqs, phases))
    out /= np.sqrt(np.mean(out ** 2, axis=1, keepdims=True)) + 1e-9
    out += noise * rng.standard_normal(out.shape)
    return Tensor(out[:, None, :])


# ---------------------------------------------------------------------------
# procedural shape images for the pixel task


def _disk(size: int, cx: float, cy: float, r: float) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    return ((xx - cx) ** 2 + (yy - cy) ** 2 <= r * r).astype(np.float64)


def gen_shape_images(n_per_class: int, size: int = 16, seed: int = 0,
                     noise: float = 0.08):
    """Four shape classes (disk, hollow square, cross, diagonal stripes)
    with jittered geometry and pixel noise.

    Returns (images (N, size, size) in [0, 1], labels (N,)).
    """
    rng = np.random.default_rng(seed)
    images = []
    labels = []
    for label in range(4):
        for _ in range(n_per_class):
            img = np.zeros((size, size))
            jx, jy = rng.integers(-2, 3, size=2)
            cx, cy = size / 2 + jx, size / 2 + jy
            if label == 0:
                img = _disk(size, cx, cy, size * 0.28)
            elif label == 1:
                half = int(size * 0.3)
                x0, x1 = int(cx) - half, int(cx) + half
                y0, y1 = int(cy) - half, int(cy) + half
                x0, y0 = max(x0, 0), max(y0, 0)
                x1, y1 = min(x1, size - 1), min(y1, size - 1)
                img[y0:y1 + 1, x0] = 1.0
                img[y0:y1 + 1, x1] = 1.0
                img[y0, x0:x1 + 1] = 1.0
                img[y1, x0:x1 + 1] = 1.0
            elif label == 2:
                w = 1 + int(size * 0.08)
                c, r = int(cx), int(cy)
                img[max(r - w, 0):r + w, :] = 1.0
                img[:, max(c - w, 0):c + w] = 1.0
            else:
                yy, xx = np.mgrid[0:size, 0:size]
                period = rng.integers(3, 5)
                img = (((xx + yy) // period) % 2).astype(np.float64)
            img = img + noise * rng.standard_normal((size, size))
            images.append(np.clip(img, 0.0, 1.0))
            labels.append(label)
    images = np.stack(images)
    labels = np.asarray(labels, dtype=np.int64)
    order = rng.permutation(len(labels))
    return images[order], labels[order]
