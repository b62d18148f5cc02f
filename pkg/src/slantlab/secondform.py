"""Second fundamental form, shape operators, block norms and the adapted frame.

h is read off the Gauss formula: for coordinate fields the ambient derivative
of d_j phi along d_i is the Hessian column, and h(d_i, d_j) is its normal
part.  Converting both slots with the inverse of ``coord_to_frame`` gives h in
the orthonormal tangent frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotUnitNormal, OddSlantDimension, SlantAngleSingular
from .immersion import ImmersionJet
from .pointgeom import (
    HALF_PI,
    PointFrame,
    SlantSpectrum,
    TFOperators,
    gram_schmidt_pivoted,
    holomorphic_split,
)
from .tolerances import DEFAULT


@dataclass(frozen=True)
class SecondForm:
    h: np.ndarray  # (k, k, 2n-k): h[i, j, a] = <h(E_i, E_j), N_a>

    def __call__(self, X, Y) -> np.ndarray:
        """h(X, Y) in normal-frame components; X, Y may be (k,) or batches (P, k)."""
        X, Y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
        if X.ndim == 1 and Y.ndim == 1:
            return np.einsum("ija,i,j->a", self.h, X, Y)
        X, Y = np.atleast_2d(X), np.atleast_2d(Y)
        return np.einsum("ija,pi,pj->pa", self.h, X, Y)

    def norm_sq(self) -> float:
        return float(np.sum(self.h * self.h))


@dataclass(frozen=True)
class ShapeOperator:
    A: np.ndarray  # (k, k)

    def __call__(self, X) -> np.ndarray:
        return self.A @ np.asarray(X, dtype=float)


def second_form(jet: ImmersionJet, frame: PointFrame) -> SecondForm:
    N = frame.normal_frame
    h_coord = np.einsum("da,dij->ija", N, jet.hessian)
    Cinv = np.linalg.inv(frame.coord_to_frame)
    h = np.einsum("ia,jb,ijn->abn", Cinv, Cinv, h_coord)
    return SecondForm(h)


def shape_operator(h: SecondForm, frame: PointFrame, N, unit_tol: float = 1e-10) -> ShapeOperator:
    N = np.asarray(N, dtype=float)
    if N.shape != (frame.normal_frame.shape[1],):
        raise NotUnitNormal(f"normal must have {frame.normal_frame.shape[1]} frame components")
    if abs(np.linalg.norm(N) - 1.0) > unit_tol:
        raise NotUnitNormal(f"|N| = {np.linalg.norm(N)!r}")
    return ShapeOperator(np.einsum("ija,a->ij", h.h, N))


def shape_apply(h: SecondForm, N, Y) -> np.ndarray:
    """A_N Y for batches of (not necessarily unit) normals N (P, m) and tangents Y (P, k)."""
    return np.einsum("ija,pa,pj->pi", h.h, np.atleast_2d(N), np.atleast_2d(Y))


@dataclass(frozen=True)
class HInvariants:
    norm_sq: float
    holomorphic_block: float   # |h(D^T, D^T)|^2
    slant_block: float         # |h(D^theta, D^theta)|^2
    mixed_block: float         # |h(D^T, D^theta)|^2, counted once
    mean_curvature: np.ndarray  # normal-frame components

    @property
    def mean_curvature_norm(self) -> float:
        return float(np.linalg.norm(self.mean_curvature))

    @property
    def block_sum(self) -> float:
        return self.holomorphic_block + self.slant_block + 2.0 * self.mixed_block


def h_invariants(h: SecondForm, spectrum: SlantSpectrum, angle_tol: float = DEFAULT.angle) -> HInvariants:
    U1, U2 = holomorphic_split(spectrum, angle_tol)
    H = h.h

    def block(A, B):
        return float(np.sum(np.einsum("ia,jb,ijn->abn", A, B, H) ** 2))

    k = H.shape[0]
    mean = np.einsum("iia->a", H) / k
    return HInvariants(h.norm_sq(), block(U1, U1), block(U2, U2), block(U1, U2), mean)


@dataclass(frozen=True)
class AdaptedFrame:
    slant_tangent_pairs: tuple[tuple[np.ndarray, np.ndarray], ...]  # frame coordinates
    slant_normals: tuple[np.ndarray, ...]                          # normal-frame coordinates
    holomorphic_frame: np.ndarray                                  # (k, m1)
    theta: float

    def tangent_vectors(self) -> np.ndarray:
        cols = [self.holomorphic_frame[:, j] for j in range(self.holomorphic_frame.shape[1])]
        for a, b in self.slant_tangent_pairs:
            cols += [a, b]
        return np.column_stack(cols) if cols else np.zeros((0, 0))

    def normal_vectors(self) -> np.ndarray:
        return np.column_stack(self.slant_normals)

    def orthonormality_defect(self) -> float:
        E = self.tangent_vectors()
        N = self.normal_vectors()
        return max(float(np.abs(E.T @ E - np.eye(E.shape[1])).max()),
                   float(np.abs(N.T @ N - np.eye(N.shape[1])).max()))


def adapted_frame(frame: PointFrame, tf: TFOperators, spectrum: SlantSpectrum,
                  theta_guard: float = DEFAULT.theta_guard,
                  angle_tol: float = DEFAULT.angle) -> AdaptedFrame:
    """Frame pairing each slant direction e with sec(theta) T e, normals csc(theta) F e."""
    cs = spectrum.clusters
    if len(cs) != 2 or cs[0].theta > angle_tol:
        raise SlantAngleSingular("need exactly one holomorphic and one proper slant cluster")
    slant = cs[1]
    theta = slant.theta
    if not (theta_guard < theta < HALF_PI - theta_guard):
        raise SlantAngleSingular(f"theta = {theta!r} outside ({theta_guard}, pi/2 - {theta_guard})")
    if slant.multiplicity % 2:
        raise OddSlantDimension(f"proper slant cluster has odd dimension {slant.multiplicity}")
    sec = 1.0 / math.cos(theta)
    csc = 1.0 / math.sin(theta)
    T, F = tf.T, tf.F

    pool = slant.basis.copy()
    pairs, normals = [], []
    while pool.shape[1]:
        e1 = pool[:, 0] / np.linalg.norm(pool[:, 0])
        e2 = sec * (T @ e1)
        pairs.append((e1, e2))
        normals += [csc * (F @ e1), csc * (F @ e2)]
        rest = pool[:, 1:]
        rest = rest - np.outer(e1, e1 @ rest) - np.outer(e2, e2 @ rest)
        if rest.shape[1] <= 1:
            break
        pool, _ = gram_schmidt_pivoted(rest, rest.shape[1] - 1)
    return AdaptedFrame(tuple(pairs), tuple(normals), cs[0].basis, theta)
