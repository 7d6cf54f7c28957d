import math

import numpy as np
from scipy import special

from analysis.sobolev import SampledField2D


def gaussian_field(n: int = 64, half_width: float = 4.0, padding: int = 4) -> SampledField2D:
    """Sample exp(-pi |x|^2), whose transform is itself."""
    return SampledField2D.from_function(
        lambda x1, x2: np.exp(-math.pi * (x1**2 + x2**2)),
        (-half_width, half_width),
        (-half_width, half_width),
        n,
        n,
        padding=padding,
    )


def gaussian_norm_sq(s: float) -> float:
    """Closed-form squared homogeneous H^s norm of exp(-pi |x|^2) in the plane."""
    return special.gamma(s + 1) / (2 * (2 * math.pi) ** s)


def bump(x: np.ndarray, center: float = 0.0, radius: float = 1.0) -> np.ndarray:
    """Smooth bump exp(1 - 1/(1 - rho^2)) supported in |x - center| < radius."""
    rho2 = ((np.asarray(x, dtype=float) - center) / radius) ** 2
    inside = rho2 < 1
    safe = np.where(inside, rho2, 0.0)
    return np.where(inside, np.exp(1 - 1 / (1 - safe)), 0.0)


def separable_fields(n: int = 128, padding: int = 4) -> dict[str, SampledField2D]:
    """Generate five smooth separable fields on [-2, 2]^2 for method cross-checks."""
    box = (-2.0, 2.0)
    profiles = {
        "bump": lambda x1: bump(x1, 0.0, 1.5),
        "shifted-bump": lambda x1: bump(x1, 0.4, 1.2),
        "modulated-bump": lambda x1: bump(x1, 0.0, 1.6) * np.cos(2 * x1),
        "bump-pair": lambda x1: bump(x1, -0.8, 0.9) + 0.5 * bump(x1, 0.9, 0.8),
        "odd-bump": lambda x1: x1 * bump(x1, 0.0, 1.4),
    }
    return {
        name: SampledField2D.from_function(
            lambda x1, x2, a=a: a(x1) * bump(x2, 0.0, 1.5), box, box, n, n, padding=padding
        )
        for name, a in profiles.items()
    }


def random_compact_field(
    rng: np.random.Generator, n: int = 64, half_width: float = 4.0, padding: int = 4
) -> SampledField2D:
    """Generate a random sum of 1 to 4 radial bumps kept inside the box."""
    count = int(rng.integers(1, 5))
    radii = rng.uniform(0.5, 1.5, count)
    centers = rng.uniform(-1.0, 1.0, (count, 2)) * (half_width - 2.0)
    amplitudes = rng.uniform(-1.0, 1.0, count)

    def fn(x1, x2):
        total = np.zeros_like(x1)
        for r, (c1, c2), a in zip(radii, centers, amplitudes):
            total += a * bump(np.hypot(x1 - c1, x2 - c2), 0.0, r)
        return total

    box = (-half_width, half_width)
    return SampledField2D.from_function(fn, box, box, n, n, padding=padding)


def random_compact_fields(
    count: int, seed: int = 0, n: int = 64, half_width: float = 4.0, padding: int = 4
) -> list[SampledField2D]:
    """Generate independent random fields, one seed stream per field."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [
        random_compact_field(np.random.default_rng(child), n, half_width, padding)
        for child in children
    ]
