"""Column and matrix spinors, polar decomposition, bilinears and the chiral block form."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._backend import jnp
from .clifford import GAMMA, GAMMA5, GAMMA_UP, IDENTITY, PSEUDOSCALAR, as_cmat4, tilde
from .errors import SingularSpinor

SINGULAR_THRESHOLD = 1e-12

# Unitary passing from the Dirac to the chiral representation.
CHIRAL_U = (IDENTITY + GAMMA5 @ GAMMA[0]) / np.sqrt(2.0)
_PAULI2 = np.array([[0, -1j], [1j, 0]])


def column_from_octet(r, s):
    """Dirac column from the real octet (r_0..r_3, s_0..s_3)."""
    r = jnp.asarray(r)
    s = jnp.asarray(s)
    return jnp.array(
        [r[0] - 1j * r[3], r[2] - 1j * r[1], s[3] + 1j * s[0], s[1] + 1j * s[2]]
    )


def octet_from_column(psi):
    psi = np.asarray(psi, dtype=complex)
    r = np.array([psi[0].real, -psi[1].imag, psi[1].real, -psi[0].imag])
    s = np.array([psi[2].imag, psi[3].real, psi[3].imag, psi[2].real])
    return r, s


def matrix_from_column(psi):
    """Columns psi, g5 (i g^2 psi*), g5 psi, i g^2 psi* (traceable)."""
    psi = jnp.asarray(psi, dtype=jnp.complex128)
    conj_col = 1j * GAMMA_UP[2] @ jnp.conj(psi)
    return jnp.stack([psi, GAMMA5 @ conj_col, GAMMA5 @ psi, conj_col], axis=-1)


def polar_parts(m):
    """Density, pseudoscalar angle and rotor of a matrix spinor (traceable, unchecked)."""
    p = m @ tilde(m)
    c = jnp.real(jnp.trace(p, axis1=-2, axis2=-1)) / 4.0
    s = jnp.real(jnp.trace(p @ (-PSEUDOSCALAR), axis1=-2, axis2=-1)) / 4.0
    rho = jnp.hypot(c, s)
    beta = jnp.arctan2(s, c)
    half = beta / 2.0
    rotor = (jnp.cos(half)[..., None, None] * IDENTITY - jnp.sin(half)[..., None, None] * PSEUDOSCALAR) @ m
    return rho, beta, rotor / jnp.sqrt(rho)[..., None, None]


def pseudoscalar_exp(angle):
    return jnp.cos(angle) * IDENTITY + jnp.sin(angle) * PSEUDOSCALAR


def assemble(rho, beta, rotor):
    return jnp.sqrt(rho) * pseudoscalar_exp(beta / 2.0) @ rotor


def singularity_measure(m):
    """|det M| relative to (|M|_F / 2)^4; 1/(v^0)^2 for a matrix spinor, 0 when singular."""
    scale = jnp.sqrt(jnp.sum(jnp.abs(m) ** 2, axis=(-2, -1))) / 2.0
    return jnp.abs(jnp.linalg.det(m)) / jnp.maximum(scale, 1e-300) ** 4


def require_nonsingular(m, where: str = "") -> None:
    measure = float(singularity_measure(m))
    if not measure > SINGULAR_THRESHOLD:
        loc = f" at {where}" if where else ""
        raise SingularSpinor(f"matrix spinor is singular{loc} (relative determinant {measure:.3e})")


def polar(m) -> tuple[float, float, np.ndarray]:
    """Checked polar decomposition M = sqrt(rho) exp(I beta/2) R."""
    m = as_cmat4(m)
    require_nonsingular(m)
    rho, beta, rotor = polar_parts(m)
    return float(rho), float(beta), np.asarray(rotor)


def rho_beta_from_components(r, s) -> tuple[float, float]:
    """Density and angle directly from the real octet (Euclidean sums)."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    inv1 = float(r @ r - s @ s)
    inv2 = float(2.0 * r @ s)
    norm = float(r @ r + s @ s)
    if not np.hypot(inv1, inv2) > SINGULAR_THRESHOLD * max(norm, 1e-300):
        raise SingularSpinor("both octet invariants vanish")
    return float(np.hypot(inv1, inv2)), float(np.arctan2(inv2, inv1))


def bilinear_parts(m):
    """rho, beta, v^a, s^a (upper tangent indices), e1 and e2 (traceable)."""
    rho, beta, _ = polar_parts(m)
    mt = tilde(m)

    def vec(k):
        w = m @ GAMMA[k] @ mt
        return jnp.real(jnp.einsum("ij,aji->a", w, GAMMA_UP)) / (4.0 * rho)

    e1 = m @ GAMMA[1] @ mt / rho
    e2 = m @ GAMMA[2] @ mt / rho
    return rho, beta, vec(0), vec(3), e1, e2


@dataclass(frozen=True)
class Bilinears:
    rho: float
    beta: float
    v: np.ndarray
    s: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    @property
    def v_lower(self) -> np.ndarray:
        return self.v * np.array([1.0, -1.0, -1.0, -1.0])

    @property
    def s_lower(self) -> np.ndarray:
        return self.s * np.array([1.0, -1.0, -1.0, -1.0])


@dataclass(frozen=True)
class MatrixSpinor:
    """A matrix spinor; the polar data are computed on first access."""

    m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", as_cmat4(self.m))

    @classmethod
    def from_polar(cls, rho: float, beta: float, rotor) -> "MatrixSpinor":
        if not rho > 0:
            raise ValueError("density must be positive")
        return cls(np.asarray(assemble(rho, beta, jnp.asarray(rotor))))

    @cached_property
    def _polar(self):
        return polar(self.m)

    @property
    def rho(self) -> float:
        return self._polar[0]

    @property
    def beta(self) -> float:
        return self._polar[1]

    @property
    def rotor(self) -> np.ndarray:
        return self._polar[2]

    @property
    def column(self) -> np.ndarray:
        return self.m[:, 0].copy()


def to_matrix(psi) -> MatrixSpinor:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (4,):
        raise ValueError(f"expected a 4-component column, got shape {psi.shape}")
    return MatrixSpinor(np.asarray(matrix_from_column(psi)))


def bilinears(psi) -> Bilinears:
    """Normalized velocity and spin (upper tangent indices) plus e1, e2."""
    if isinstance(psi, MatrixSpinor):
        m = psi.m
    elif np.shape(psi) == (4,):
        m = to_matrix(psi).m
    else:
        m = as_cmat4(psi)
    require_nonsingular(m)
    rho, beta, v, s, e1, e2 = bilinear_parts(m)
    return Bilinears(float(rho), float(beta), np.asarray(v), np.asarray(s), np.asarray(e1), np.asarray(e2))


def baylis(m):
    """Chiral block form U M U^dagger of a matrix spinor."""
    return CHIRAL_U @ m @ CHIRAL_U.conj().T


def baylis_blocks(theta) -> tuple[np.ndarray, np.ndarray, float]:
    """Upper block, lower block and the largest off-diagonal entry."""
    theta = np.asarray(theta)
    off = max(np.abs(theta[:2, 2:]).max(), np.abs(theta[2:, :2]).max())
    return theta[:2, :2], theta[2:, 2:], float(off)


def conjugate_block(q) -> np.ndarray:
    """sigma_2 Q* sigma_2, the partner of the upper chiral block."""
    return _PAULI2 @ np.conj(q) @ _PAULI2
