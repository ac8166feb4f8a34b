"""so(3) and se(3) = so(3) x R^3 kernel.

Algebra elements are stored as pairs of 3-vectors (angular, linear); the
4x4 homogeneous-matrix picture never appears here, only in test oracles.
Momenta live in the dual and pair with algebra elements by the plain
componentwise dot product.

Conventions:
  hat3(w) x = w x x                          (cross product as a matrix)
  [(w, v), (s, u)] = (w x s, w x u - s x v)  (semidirect-product bracket)
  ad*_(w,v) (pi, p) = (pi x w + p x v, p x w)
  Ad_(R,r) (w, v) = (R w, r x (R w) + R v)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: max-abs tolerance on M + M^T accepted by vee3
SKEW_TOL = 1e-10
#: Frobenius tolerance on R^T R - I and |det R - 1| for group elements
ORTHO_TOL = 1e-12
#: below this angle exp_so3 switches to its Taylor branch
SMALL_ANGLE = 1e-6


class NotSkew(ValueError):
    """Raised when a matrix handed to vee3 is not skew-symmetric."""


def _vec3(x, name):
    a = np.asarray(x, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class AlgebraElementSE3:
    """Velocity-like element (angular, linear) of so(3) x R^3."""

    ang: np.ndarray
    lin: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ang", _vec3(self.ang, "ang"))
        object.__setattr__(self, "lin", _vec3(self.lin, "lin"))


@dataclass(frozen=True)
class CoAlgebraElementSE3:
    """Momentum-like element (angular momentum, linear momentum) of the dual."""

    angmom: np.ndarray
    linmom: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "angmom", _vec3(self.angmom, "angmom"))
        object.__setattr__(self, "linmom", _vec3(self.linmom, "linmom"))


@dataclass(frozen=True)
class GroupElementSE3:
    """Pose (rotation, translation); the rotation must sit on SO(3)."""

    rot: np.ndarray
    trans: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rot, dtype=float)
        if R.shape != (3, 3):
            raise ValueError(f"rot must be 3x3, got shape {R.shape}")
        object.__setattr__(self, "rot", R)
        object.__setattr__(self, "trans", _vec3(self.trans, "trans"))
        err = np.linalg.norm(R.T @ R - np.eye(3))
        if err > ORTHO_TOL:
            raise ValueError(f"rot is not orthogonal: |R^T R - I|_F = {err:.3e}")
        det = np.linalg.det(R)
        if abs(det - 1.0) > ORTHO_TOL:
            raise ValueError(f"rot has det {det!r}, expected 1")


def hat3(w) -> np.ndarray:
    """Skew matrix of a 3-vector: hat3(w) @ x == cross(w, x)."""
    w = _vec3(w, "w")
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


def vee3(M) -> np.ndarray:
    """Inverse of hat3. Rejects matrices that are not skew within SKEW_TOL."""
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {M.shape}")
    dev = np.abs(M + M.T).max()
    if dev > SKEW_TOL:
        raise NotSkew(f"matrix deviates from skew-symmetry by {dev:.3e}")
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def bracket_se3(a: AlgebraElementSE3, b: AlgebraElementSE3) -> AlgebraElementSE3:
    """Lie bracket on so(3) x R^3 in cross-product form."""
    return AlgebraElementSE3(
        ang=np.cross(a.ang, b.ang),
        lin=np.cross(a.ang, b.lin) - np.cross(b.ang, a.lin),
    )


def pairing(mu: CoAlgebraElementSE3, xi: AlgebraElementSE3) -> float:
    """Natural dual pairing <(pi, p), (w, v)> = pi . w + p . v."""
    return float(mu.angmom @ xi.ang + mu.linmom @ xi.lin)


def ad_star_se3(xi: AlgebraElementSE3, mu: CoAlgebraElementSE3) -> CoAlgebraElementSE3:
    """Coadjoint action, defined by <ad*_xi mu, zeta> = <mu, [xi, zeta]>."""
    return CoAlgebraElementSE3(
        angmom=np.cross(mu.angmom, xi.ang) + np.cross(mu.linmom, xi.lin),
        linmom=np.cross(mu.linmom, xi.ang),
    )


def Ad_se3(g: GroupElementSE3, xi: AlgebraElementSE3) -> AlgebraElementSE3:
    """Adjoint action of a pose on an algebra element (g xi g^-1)."""
    rw = g.rot @ xi.ang
    return AlgebraElementSE3(ang=rw, lin=np.cross(g.trans, rw) + g.rot @ xi.lin)


def exp_so3(w) -> np.ndarray:
    """Rotation exp(hat3(w)) by the closed Rodrigues formula.

    Below SMALL_ANGLE the sin(t)/t and (1-cos(t))/t^2 coefficients switch
    to two-term Taylor expansions, which keeps the map smooth through w = 0.
    """
    w = _vec3(w, "w")
    t2 = float(w @ w)
    if t2 < SMALL_ANGLE * SMALL_ANGLE:
        a = 1.0 - t2 / 6.0
        b = 0.5 - t2 / 24.0
    else:
        t = math.sqrt(t2)
        a = math.sin(t) / t
        b = (1.0 - math.cos(t)) / t2
    W = hat3(w)
    return np.eye(3) + a * W + b * (W @ W)
