"""Voxel domains, quaternion-valued grid fields, inner products and norms.

Fields are stored cell-centered on a uniform axis-aligned grid with
isotropic spacing h; values are (n1, n2, n3, 4) arrays in component order
(s, v1, v2, v3). Volume integrals use the midpoint rule, surface integrals
the face-midpoint rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quaternion import Quaternion, conj_arr, qmul_arr

__all__ = [
    "VoxelDomain",
    "QField",
    "BoundaryData",
    "build_domain",
    "l2_inner",
    "sc_inner",
    "l2_norm",
    "h1_norm",
    "lq_norm",
    "trace_boundary",
    "zero_boundary",
]


@dataclass(frozen=True)
class VoxelDomain:
    """Axis-aligned uniform voxel grid with boundary face data."""

    origin: np.ndarray            # (3,)
    n: tuple[int, int, int]       # cells per axis
    h: float                      # isotropic spacing
    interior_mask: np.ndarray = field(repr=False, default=None)
    # boundary faces, one row each
    face_cell: np.ndarray = field(repr=False, default=None)    # (M, 3) int
    face_normal: np.ndarray = field(repr=False, default=None)  # (M, 3) float
    face_center: np.ndarray = field(repr=False, default=None)  # (M, 3) float

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.n

    @property
    def num_cells(self) -> int:
        n1, n2, n3 = self.n
        return n1 * n2 * n3

    @property
    def num_faces(self) -> int:
        return self.face_cell.shape[0]

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @property
    def face_area(self) -> float:
        return self.h**2

    def cell_centers(self) -> np.ndarray:
        """(n1, n2, n3, 3) array of cell-center coordinates."""
        axes = [self.origin[i] + (np.arange(self.n[i]) + 0.5) * self.h
                for i in range(3)]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        return np.stack([X, Y, Z], axis=-1)

    def collar_mask(self, width: int = 1) -> np.ndarray:
        """Cells within `width` cells of the boundary."""
        m = np.zeros(self.n, dtype=bool)
        w = width
        m[:w], m[-w:] = True, True
        m[:, :w], m[:, -w:] = True, True
        m[:, :, :w], m[:, :, -w:] = True, True
        return m

    def same_grid(self, other: "VoxelDomain") -> bool:
        return (self.n == other.n and np.allclose(self.origin, other.origin)
                and self.h == other.h)


def build_domain(origin, physical_extent, n) -> VoxelDomain:
    """Build a full-box voxel domain with isotropic spacing."""
    origin = np.asarray(origin, dtype=float)
    ext = np.asarray(physical_extent, dtype=float)
    n = tuple(int(v) for v in np.atleast_1d(n) * np.ones(3, dtype=int))
    if any(v < 2 for v in n):
        raise ValueError("need at least 2 cells per axis")
    if np.any(ext <= 0):
        raise ValueError("physical extents must be positive")
    spacings = ext / np.asarray(n)
    if not np.allclose(spacings, spacings[0], rtol=1e-12, atol=0.0):
        raise ValueError("anisotropic spacing not supported: extent/n must match per axis")
    h = float(spacings[0])

    mask = np.ones(n, dtype=bool)
    cells, normals, centers = [], [], []
    for ax in range(3):
        for side in (0, 1):
            uax, vax = [a for a in range(3) if a != ax]
            iu, iv = np.meshgrid(np.arange(n[uax]), np.arange(n[vax]), indexing="ij")
            cell = np.zeros(iu.shape + (3,), dtype=int)
            cell[..., uax] = iu
            cell[..., vax] = iv
            cell[..., ax] = 0 if side == 0 else n[ax] - 1
            nrm = np.zeros(3)
            nrm[ax] = -1.0 if side == 0 else 1.0
            cent = np.zeros(iu.shape + (3,))
            cent[..., uax] = origin[uax] + (iu + 0.5) * h
            cent[..., vax] = origin[vax] + (iv + 0.5) * h
            cent[..., ax] = origin[ax] + (0.0 if side == 0 else n[ax] * h)
            cells.append(cell.reshape(-1, 3))
            normals.append(np.broadcast_to(nrm, cell.reshape(-1, 3).shape).copy())
            centers.append(cent.reshape(-1, 3))
    return VoxelDomain(
        origin=origin,
        n=n,
        h=h,
        interior_mask=mask,
        face_cell=np.concatenate(cells),
        face_normal=np.concatenate(normals),
        face_center=np.concatenate(centers),
    )


@dataclass
class QField:
    """Quaternion-valued grid function on a voxel domain."""

    domain: VoxelDomain
    values: np.ndarray  # (n1, n2, n3, 4)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.domain.shape + (4,):
            raise ValueError(
                f"values shape {self.values.shape} does not match domain "
                f"{self.domain.shape + (4,)}")

    @staticmethod
    def zeros(domain: VoxelDomain) -> "QField":
        return QField(domain, np.zeros(domain.shape + (4,)))

    @staticmethod
    def constant(domain: VoxelDomain, q) -> "QField":
        if isinstance(q, Quaternion):
            q = q.as_array()
        vals = np.broadcast_to(np.asarray(q, dtype=float), domain.shape + (4,)).copy()
        return QField(domain, vals)

    def copy(self) -> "QField":
        return QField(self.domain, self.values.copy())

    def is_pure(self, tol: float = 0.0) -> bool:
        return float(np.abs(self.values[..., 0]).max(initial=0.0)) <= tol

    def __add__(self, other: "QField") -> "QField":
        _check_same(self, other)
        return QField(self.domain, self.values + other.values)

    def __sub__(self, other: "QField") -> "QField":
        _check_same(self, other)
        return QField(self.domain, self.values - other.values)

    def __mul__(self, a: float) -> "QField":
        return QField(self.domain, self.values * float(a))

    __rmul__ = __mul__

    def __neg__(self) -> "QField":
        return QField(self.domain, -self.values)


@dataclass
class BoundaryData:
    """Quaternion value per boundary face."""

    domain: VoxelDomain
    values: np.ndarray  # (M, 4)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.domain.num_faces, 4):
            raise ValueError("boundary values must have one quaternion per face")

    @staticmethod
    def zeros(domain: VoxelDomain) -> "BoundaryData":
        return BoundaryData(domain, np.zeros((domain.num_faces, 4)))


def _check_same(u: QField, v: QField) -> None:
    if not u.domain.same_grid(v.domain):
        raise ValueError("fields live on different domains")


def l2_inner(u: QField, v: QField) -> Quaternion:
    """Quaternionic L2 inner product, midpoint quadrature of conj(u) v."""
    _check_same(u, v)
    prod = qmul_arr(conj_arr(u.values), v.values)
    return Quaternion.from_array(prod.sum(axis=(0, 1, 2)) * u.domain.cell_volume)


def sc_inner(u: QField, v: QField) -> float:
    """Scalar part of the L2 inner product (the real inner product)."""
    _check_same(u, v)
    # Sc(conj(u) v) = componentwise dot product
    return float((u.values * v.values).sum() * u.domain.cell_volume)


def l2_norm(u: QField) -> float:
    return float(np.sqrt((u.values**2).sum() * u.domain.cell_volume))


def _forward_diff(vals: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Forward difference with a backward fallback on the last layer."""
    fw = (np.roll(vals, -1, axis=axis) - vals) / h
    bw = (vals - np.roll(vals, 1, axis=axis)) / h
    out = fw
    sl = [slice(None)] * vals.ndim
    sl[axis] = -1
    out[tuple(sl)] = bw[tuple(sl)]
    return out


def h1_norm(u: QField) -> float:
    """Sobolev H1 norm with forward-difference derivatives."""
    h = u.domain.h
    total = (u.values**2).sum()
    for ax in range(3):
        total += (_forward_diff(u.values, ax, h) ** 2).sum()
    return float(np.sqrt(total * u.domain.cell_volume))


def lq_norm(u: QField, q: float = 1.25) -> float:
    """L^q norm; q restricted to (1, 3/2) or q = 2."""
    if not (1.0 < q < 1.5 or q == 2.0):
        raise ValueError("q must satisfy 1 < q < 3/2 (or q = 2)")
    mag = np.sqrt((u.values**2).sum(axis=-1))
    return float((mag**q).sum() * u.domain.cell_volume) ** (1.0 / q)


def trace_boundary(u: QField) -> BoundaryData:
    """Sample the cell adjacent to each boundary face."""
    c = u.domain.face_cell
    return BoundaryData(u.domain, u.values[c[:, 0], c[:, 1], c[:, 2], :].copy())


def zero_boundary(u: QField, width: int = 1) -> QField:
    """Zero the boundary collar (discrete membership in H^1 with zero trace)."""
    out = u.copy()
    out.values[u.domain.collar_mask(width)] = 0.0
    return out
