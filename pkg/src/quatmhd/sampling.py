"""Seeded random smooth fields for tests, calibration and constant estimation.

All generators take a numpy Generator (or a seed) and return QFields. The
"bump" variants vanish smoothly at the box faces, so their one-sided
difference layers carry no O(1) spikes.
"""

from __future__ import annotations

import numpy as np

from .grid import QField, VoxelDomain

__all__ = [
    "random_smooth",
    "random_bump",
    "random_pure_bump",
    "random_divfree",
    "random_shear",
]


def _rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def _unit_coords(domain: VoxelDomain) -> np.ndarray:
    """Cell centers mapped to [0, 1]^3."""
    x = domain.cell_centers() - domain.origin
    ext = np.asarray(domain.n) * domain.h
    return x / ext


def _fourier_scalar(domain: VoxelDomain, rng, kmax: int) -> np.ndarray:
    """Low-order random trigonometric polynomial on the unit cube."""
    s = _unit_coords(domain)
    out = np.zeros(domain.shape)
    for _ in range(4):
        k = rng.integers(0, kmax + 1, size=3)
        phase = rng.uniform(0, 2 * np.pi, size=3)
        amp = rng.standard_normal()
        out += amp * np.prod(
            [np.cos(2 * np.pi * k[i] * s[..., i] + phase[i]) for i in range(3)],
            axis=0)
    return out


def random_smooth(domain: VoxelDomain, seed=0, kmax: int = 2) -> QField:
    """Smooth random quaternion field, generically nonzero at the faces."""
    rng = _rng(seed)
    vals = np.stack([_fourier_scalar(domain, rng, kmax) for _ in range(4)], axis=-1)
    return QField(domain, vals)


def _bump(domain: VoxelDomain) -> np.ndarray:
    """C^1 cutoff prod_i (4 s_i (1 - s_i))^3 vanishing at the faces."""
    s = _unit_coords(domain)
    return np.prod((4.0 * s * (1.0 - s)) ** 3, axis=-1)


def random_bump(domain: VoxelDomain, seed=0, kmax: int = 2) -> QField:
    """Smooth random field that decays to zero at the box faces."""
    u = random_smooth(domain, seed, kmax)
    return QField(domain, u.values * _bump(domain)[..., None])


def random_pure_bump(domain: VoxelDomain, seed=0, kmax: int = 2) -> QField:
    """Vector-valued (pure quaternion) bump field."""
    u = random_bump(domain, seed, kmax)
    out = u.values.copy()
    out[..., 0] = 0.0
    return QField(domain, out)


def random_divfree(domain: VoxelDomain, seed=0) -> QField:
    """Exactly divergence-free constant-plus-shear field: a_i depends only
    on coordinates other than x_i, so the discrete forward divergence and
    the convective skew-symmetry identity hold exactly."""
    rng = _rng(seed)
    x = domain.cell_centers()
    c = rng.standard_normal(3)
    s = rng.standard_normal((3, 3)) * (1.0 - np.eye(3))  # zero diagonal
    out = np.zeros(domain.shape + (4,))
    for i in range(3):
        out[..., 1 + i] = c[i] + sum(s[i, j] * x[..., j] for j in range(3) if j != i)
    return QField(domain, out)


def random_shear(domain: VoxelDomain, seed=0) -> QField:
    """Alias kept for call sites that emphasise the shear structure."""
    return random_divfree(domain, seed)
