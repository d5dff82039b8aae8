"""Spacetime Clifford algebra Cl(1,3) in the fixed Dirac representation.

Signature (+,-,-,-), Levi-Civita symbol with eps_{0123} = +1. Every algebra
element is carried as a 4x4 complex matrix. Functions that may run inside
traced code are written with ``jnp``; the constant tables are plain numpy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._backend import jnp

CMat4 = np.ndarray

ETA = np.diag([1.0, -1.0, -1.0, -1.0])
IDENTITY = np.eye(4, dtype=complex)

_I2 = np.eye(2)
_Z2 = np.zeros((2, 2))
PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

# gamma_a with a lower tangent index; gamma^a = eta^{ab} gamma_b.
GAMMA = np.array(
    [np.block([[_I2, _Z2], [_Z2, -_I2]]).astype(complex)]
    + [np.block([[_Z2, -p], [p, _Z2]]) for p in PAULI]
)
GAMMA_UP = np.einsum("ab,bij->aij", ETA, GAMMA)
GAMMA5 = 1j * GAMMA_UP[0] @ GAMMA_UP[1] @ GAMMA_UP[2] @ GAMMA_UP[3]
PSEUDOSCALAR = GAMMA[0] @ GAMMA[1] @ GAMMA[2] @ GAMMA[3]
ALPHA = np.array([GAMMA[k] @ GAMMA[0] for k in (1, 2, 3)])

# Right-multiplier that generates the U(1) phase of a matrix spinor.
PHASE_GEN = GAMMA[2] @ GAMMA[1]


def _levi_civita() -> np.ndarray:
    eps = np.zeros((4, 4, 4, 4))
    for perm in itertools.permutations(range(4)):
        eps[perm] = np.linalg.det(np.eye(4)[list(perm)])
    return eps


LEVI_CIVITA = _levi_civita()
LEVI_CIVITA_UP = -LEVI_CIVITA

SIGMA = np.array(
    [[0.25 * (GAMMA[a] @ GAMMA[b] - GAMMA[b] @ GAMMA[a]) for b in range(4)] for a in range(4)]
)
SIGMA_UP = np.einsum("ac,bd,cdij->abij", ETA, ETA, SIGMA)


def as_cmat4(m) -> np.ndarray:
    """Validate and convert to a finite complex 4x4 numpy array."""
    arr = np.asarray(m, dtype=complex)
    if arr.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def gamma_flat(index) -> np.ndarray:
    """Flat gamma matrix with a lower tangent index.

    Integers 0..3 give gamma_a; ``5`` (or ``"5"``) gives gamma^5, ``"i"`` the
    pseudoscalar gamma_0 gamma_1 gamma_2 gamma_3 and ``"alpha1"``..``"alpha3"``
    the products gamma_k gamma_0.
    """
    if isinstance(index, (int, np.integer)) and not isinstance(index, bool):
        if 0 <= index <= 3:
            return GAMMA[index].copy()
        if index == 5:
            return GAMMA5.copy()
        raise IndexError(f"gamma index {index} out of range")
    named = {"5": GAMMA5, "i": PSEUDOSCALAR, "alpha1": ALPHA[0], "alpha2": ALPHA[1], "alpha3": ALPHA[2]}
    if index in named:
        return named[index].copy()
    raise IndexError(f"unknown gamma index {index!r}")


def sigma(a: int, b: int) -> np.ndarray:
    """Lorentz generator sigma_ab = [gamma_a, gamma_b] / 4."""
    for idx in (a, b):
        if not (isinstance(idx, (int, np.integer)) and 0 <= idx <= 3):
            raise IndexError(f"tangent index {idx!r} out of range")
    return SIGMA[a, b].copy()


def tilde(m):
    """Reversion gamma_0 M^dagger gamma_0 (works on stacks of matrices)."""
    return GAMMA[0] @ jnp.conj(jnp.swapaxes(m, -1, -2)) @ GAMMA[0]


def commutator(a, b):
    return a @ b - b @ a


def anticommutator(a, b):
    return a @ b + b @ a


def trace_product(a, b):
    """Normalized trace Tr(AB)/4, the scalar product of the algebra."""
    return jnp.einsum("...ij,...ji->...", a, b) / 4.0


def rotation_exp(angle, generator):
    """exp(angle * G) for a generator with G^2 = -1."""
    return jnp.cos(angle) * IDENTITY + jnp.sin(angle) * generator


def boost_exp(rapidity, generator):
    """exp(rapidity * G) for a generator with G^2 = +1."""
    return jnp.cosh(rapidity) * IDENTITY + jnp.sinh(rapidity) * generator


# Sixteen-element basis: 1, gamma^a, alpha_k, spatial bivectors, trivectors, gamma^5.
GAMMA_BASIS = np.array(
    [
        IDENTITY,
        GAMMA_UP[0],
        GAMMA_UP[1],
        GAMMA_UP[2],
        GAMMA_UP[3],
        ALPHA[0],
        ALPHA[1],
        ALPHA[2],
        GAMMA_UP[2] @ GAMMA_UP[3],
        GAMMA_UP[3] @ GAMMA_UP[1],
        GAMMA_UP[1] @ GAMMA_UP[2],
        GAMMA_UP[1] @ GAMMA_UP[2] @ GAMMA_UP[3],
        GAMMA_UP[0] @ GAMMA_UP[2] @ GAMMA_UP[3],
        GAMMA_UP[0] @ GAMMA_UP[3] @ GAMMA_UP[1],
        GAMMA_UP[0] @ GAMMA_UP[1] @ GAMMA_UP[2],
        GAMMA5,
    ]
)
# Zero-based positions of the basis elements a vector must not contain.
NON_VECTOR_SLOTS = (0,) + tuple(range(5, 16))
VECTOR_SLOTS = (1, 2, 3, 4)

_GRAM = np.einsum("mij,nji->mn", GAMMA_BASIS, GAMMA_BASIS) / 4.0
GAMMA_DUAL = np.einsum("nm,mij->nij", np.linalg.inv(_GRAM), GAMMA_BASIS)


def basis_project(m):
    """Coefficients c_n with M = sum_n c_n Gamma_n."""
    return jnp.einsum("...ij,nji->...n", m, GAMMA_DUAL) / 4.0


def basis_reconstruct(coeffs):
    return jnp.einsum("...n,nij->...ij", coeffs, GAMMA_BASIS)


def vector_rep(lam, lam_inv):
    """Real matrix r^a_b = Tr(L^-1 gamma^a L gamma_b)/4, so that r^a_b L gamma^b L^-1 = gamma^a."""
    r = jnp.einsum("ij,ajk,kl,bli->ab", lam_inv, GAMMA_UP, lam, GAMMA) / 4.0
    return jnp.real(r)


@dataclass(frozen=True)
class LorentzParams:
    """Antisymmetric parameters theta_ab (lower indices) of exp(theta_ab sigma^ab / 2)."""

    theta: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        if th.shape != (4, 4):
            raise ValueError(f"theta must be 4x4, got {th.shape}")
        if not np.all(np.isfinite(th)):
            raise ValueError("theta has non-finite entries")
        if not np.array_equal(th, -th.T):
            raise ValueError("theta must be exactly antisymmetric")
        object.__setattr__(self, "theta", th)

    @classmethod
    def from_pairs(cls, **pairs: float) -> "LorentzParams":
        """Build from keyword pairs such as ``t12=0.3, t03=1.1``."""
        th = np.zeros((4, 4))
        for key, val in pairs.items():
            i, j = int(key[1]), int(key[2])
            th[i, j] = val
            th[j, i] = -val
        return cls(th)

    @cached_property
    def theta_up(self) -> np.ndarray:
        return ETA @ self.theta @ ETA

    @cached_property
    def a(self) -> float:
        return float(-np.einsum("ij,ij->", self.theta, self.theta_up) / 8.0)

    @cached_property
    def b(self) -> float:
        return float(np.einsum("ij,ab,ijab->", self.theta, self.theta, LEVI_CIVITA_UP) / 16.0)

    @cached_property
    def xy(self) -> tuple[float, float]:
        # x^2 - y^2 = a and x y = b / 2, with the sign of b carried by y.
        a, b = self.a, self.b
        s = math.hypot(a, b)
        if s == 0.0:
            return 0.0, 0.0
        if a >= 0.0:
            x = math.sqrt((a + s) / 2.0)
            y = abs(b) / (2.0 * x)
        else:
            y = math.sqrt((s - a) / 2.0)
            x = abs(b) / (2.0 * y)
        return x, math.copysign(y, b)

    @property
    def x(self) -> float:
        return self.xy[0]

    @property
    def y(self) -> float:
        return self.xy[1]

    @cached_property
    def X(self) -> float:
        return math.cos(self.y) * math.cosh(self.x)

    @cached_property
    def Y(self) -> float:
        return math.sin(self.y) * math.sinh(self.x)

    @cached_property
    def Z(self) -> np.ndarray:
        """Z^{ab}, upper indices."""
        x, y = self.xy
        n = x * x + y * y
        if n < 1e-8:
            c1 = 1.0 + (x * x - y * y) / 6.0
            c2 = x * y / 3.0
        else:
            c1 = (x * math.sinh(x) * math.cos(y) + y * math.sin(y) * math.cosh(x)) / n
            c2 = (x * math.cosh(x) * math.sin(y) - y * math.cos(y) * math.sinh(x)) / n
        dual = 0.5 * np.einsum("ij,ijab->ab", self.theta, LEVI_CIVITA_UP)
        return c1 * self.theta_up + c2 * dual

    def identity_residuals(self) -> tuple[float, float]:
        """Residuals of the two scalar identities linking X, Y and Z."""
        z_up = self.Z
        z_dn = ETA @ z_up @ ETA
        r1 = self.X**2 - self.Y**2 + np.einsum("ab,ab->", z_up, z_dn) / 8.0 - 1.0
        r2 = 2.0 * self.X * self.Y - np.einsum("ij,ab,ijab->", z_up, z_up, LEVI_CIVITA) / 16.0
        return float(r1), float(r2)


@dataclass(frozen=True)
class LorentzTransform:
    X: float
    Y: float
    Z: np.ndarray
    matrix: np.ndarray
    inverse: np.ndarray
    vector_rep: np.ndarray


def lorentz_compact(p: LorentzParams, tol: float = 1e-9) -> LorentzTransform:
    """Closed-form spinor Lorentz transformation exp(theta_ab sigma^ab / 2).

    Raises RuntimeError when the internal X, Y, Z identities fail, which can
    only signal a bug in the coefficient functions.
    """
    X, Y, Z = p.X, p.Y, p.Z
    half_z_sigma = 0.5 * np.einsum("ab,abij->ij", Z, SIGMA)
    y_term = Y * 1j * GAMMA5
    lam = X * IDENTITY + y_term + half_z_sigma
    lam_inv = X * IDENTITY + y_term - half_z_sigma
    scale = max(1.0, X * X + Y * Y + float(np.abs(Z).max()) ** 2)
    r1, r2 = p.identity_residuals()
    if abs(r1) > tol * scale or abs(r2) > tol * scale:
        raise RuntimeError(f"compact Lorentz identities violated: {r1:.3e}, {r2:.3e}")
    rep = np.asarray(vector_rep(lam, lam_inv))
    return LorentzTransform(X=X, Y=Y, Z=Z, matrix=lam, inverse=lam_inv, vector_rep=rep)
