"""Flat Kaehler ambient space R^{2n} with its canonical complex structure.

The complex structure pairs consecutive coordinates::

    J e_{2i-1} = e_{2i},   J e_{2i} = -e_{2i-1}

The Levi-Civita connection of R^{2n} is flat and J has constant entries, so
J is parallel and the Kaehler condition holds without any computation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidDimension


@dataclass(frozen=True)
class AmbientSpace:
    complex_dim: int
    J: np.ndarray = field(repr=False, compare=False)

    @property
    def real_dim(self) -> int:
        return 2 * self.complex_dim


def canonical_J(n: int) -> AmbientSpace:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise InvalidDimension(f"complex dimension must be a positive integer, got {n!r}")
    n = int(n)
    J = np.zeros((2 * n, 2 * n))
    for i in range(n):
        J[2 * i + 1, 2 * i] = 1.0
        J[2 * i, 2 * i + 1] = -1.0
    J.setflags(write=False)
    return AmbientSpace(n, J)


def apply_J(space: AmbientSpace, v) -> np.ndarray:
    """Return J v for a vector (or the columns of a 2n x m array)."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != space.real_dim:
        raise DimensionError(f"expected leading dimension {space.real_dim}, got {v.shape[0]}")
    return space.J @ v


def apply_J_fast(space: AmbientSpace, v) -> np.ndarray:
    """Index-swapping version of `apply_J`; no multiplications, same result."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != space.real_dim:
        raise DimensionError(f"expected leading dimension {space.real_dim}, got {v.shape[0]}")
    out = np.empty_like(v)
    out[1::2] = v[0::2]
    out[0::2] = -v[1::2]
    return out
