"""Recover the electromagnetic potential that makes a given spinor field solve the Dirac equation.

Two independent routes are always evaluated side by side:

* the matrix route solves the matrix Dirac equation for ``q A-slash`` directly and
  projects it onto the curved gamma matrices;
* the component route rebuilds the momentum ``P`` from the polar data
  (density, pseudoscalar angle, velocity, spin) and the connection tensor
  ``R_{ij mu}`` of the rotor field.

They share no intermediate quantity beyond the spinor itself, so their agreement
is the package's main self-check. Disagreement raises ``PathDisagreement``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from ._backend import jax, jnp
from .clifford import (
    ETA,
    GAMMA,
    GAMMA_UP,
    LEVI_CIVITA,
    LEVI_CIVITA_UP,
    NON_VECTOR_SLOTS,
    PHASE_GEN,
    SIGMA,
    SIGMA_UP,
    VECTOR_SLOTS,
    basis_project,
    tilde,
)
from .diff import check_mode, jacobian
from .errors import ConstraintViolation, DomainError, NotARotor, PathDisagreement
from .geometry import ChartPoint, Geometry, curved_gammas, omega_matrices
from .spinor import bilinear_parts, polar_parts, require_nonsingular

PATH_TOLERANCE = {"analytic": 1e-8, "fd": 1e-5}
PURITY_TOLERANCE = {"analytic": 1e-8, "fd": 1e-5}
REALITY_TOLERANCE = 1e-10
ROTOR_TOLERANCE = 1e-10


@dataclass(frozen=True)
class Constants:
    """Physical constants; natural units by default."""

    hbar: float = 1.0
    c: float = 1.0
    m: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "c", "m"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.q == 0:
            raise ValueError("charge must be nonzero")

    @property
    def mc(self) -> float:
        return self.m * self.c

    @property
    def inverse_compton(self) -> float:
        """mc / hbar, the natural inverse length."""
        return self.m * self.c / self.hbar

    @property
    def potential_scale(self) -> float:
        """mc / |q|, the natural size of a potential component."""
        return self.m * self.c / abs(self.q)


@dataclass(frozen=True)
class SpinorField:
    """A matrix spinor field ``x -> Psi(x)`` (traceable) living on a geometry."""

    matrix: Callable
    geometry: Geometry
    name: str = "spinor"

    @property
    def chart(self):
        return self.geometry.chart

    def column(self, x):
        return self.matrix(x)[:, 0]

    def point(self, coords) -> ChartPoint:
        return self.geometry.point(coords)


# ---------------------------------------------------------------- R tensor


def r_tensor_at(rotor: Callable, omega, x, mode: str = "analytic"):
    """R_{ij mu} from R d_mu R^-1 - Omega_mu = R_{ij mu} sigma^{ij} / 2, plus the non-bivector remainder."""
    r = rotor(x)
    dr = jacobian(rotor, x, mode)  # [i, j, mu]
    # R d R^-1 = -dR R~ for a unimodular rotor
    log_d = -jnp.einsum("ijm,jk->mik", dr, tilde(r)) - omega_matrices(omega)
    # Tr(sigma^{ij} sigma_{kl}) = -(delta^i_k delta^j_l - delta^i_l delta^j_k)
    coeffs = -jnp.einsum("mij,klji->klm", log_d, SIGMA)
    real = jnp.real(coeffs)
    rebuilt = 0.5 * jnp.einsum("ijm,ijab->mab", real, SIGMA_UP)
    remainder = jnp.max(jnp.abs(log_d - rebuilt))
    return real, remainder


@dataclass(frozen=True)
class RTensor:
    """Connection tensor of a rotor field at one point.

    ``R[i, j, mu]`` carries lower tangent indices i, j and a coordinate index mu;
    ``tangent[i, j, c]`` has all three indices in the frame.
    """

    R: np.ndarray
    tangent: np.ndarray
    remainder: float

    @property
    def trace_vector(self) -> np.ndarray:
        """R_i = R_{ia}^a (lower frame index)."""
        return np.einsum("iac,ac->i", self.tangent, ETA)

    @property
    def dual_vector(self) -> np.ndarray:
        """B_i = eps_{iabc} R^{abc} / 2 (lower frame index)."""
        up = np.einsum("ai,bj,ck,ijk->abc", ETA, ETA, ETA, self.tangent)
        return 0.5 * np.einsum("iabc,abc->i", LEVI_CIVITA, up)

    def antisymmetry_error(self) -> float:
        return float(np.abs(self.R + self.R.transpose(1, 0, 2)).max())


def r_tensor(rotor: Callable, geometry: Geometry, p: ChartPoint, mode: str = "analytic") -> RTensor:
    check_mode(mode)
    x = jnp.asarray(p.coords)
    omega = geometry.omega(x, mode)
    real, remainder = r_tensor_at(rotor, omega, x, mode)
    scale = max(1.0, float(jnp.max(jnp.abs(real))))
    if float(remainder) > ROTOR_TOLERANCE * scale * (1.0 if mode == "analytic" else 1e5):
        raise NotARotor(f"logarithmic derivative has a non-bivector part of size {float(remainder):.3e}")
    real = np.asarray(real)
    tangent = np.einsum("ijm,mc->ijc", real, np.asarray(geometry.tetrad.e_up(x)))
    return RTensor(R=real, tangent=tangent, remainder=float(remainder))


# ---------------------------------------------------------------- kernels


def _frame_vectors(rotor):
    """Velocity and spin directions R gamma_0 R~, R gamma_3 R~ as upper frame components."""
    rt = tilde(rotor)
    v = jnp.real(jnp.einsum("ij,jk,kl,ali->a", rotor, GAMMA[0], rt, GAMMA_UP)) / 4.0
    s = jnp.real(jnp.einsum("ij,jk,kl,ali->a", rotor, GAMMA[3], rt, GAMMA_UP)) / 4.0
    return v, s


def matrix_route(field: SpinorField, consts: Constants, x, mode: str = "analytic"):
    """(q A-slash in the frame, A_mu before discarding imaginary parts)."""
    geo = field.geometry
    psi = field.matrix(x)
    dpsi = jnp.moveaxis(jacobian(field.matrix, x, mode), -1, 0)
    omega = omega_matrices(geo.omega(x, mode))
    e_up, e_down = geo.tetrad.e_up(x), geo.tetrad.e_down(x)
    g_lo, g_up = curved_gammas(e_up, e_down)
    slash = jnp.einsum("mij,mjk->ik", g_up, dpsi + omega @ psi)
    q_aslash = (consts.hbar * slash @ PHASE_GEN - consts.mc * psi @ GAMMA[0]) @ jnp.linalg.inv(psi)
    a_mu = jnp.einsum("ij,mji->m", q_aslash, g_lo) / (4.0 * consts.q)
    return q_aslash, a_mu


def component_route(field: SpinorField, consts: Constants, x, mode: str = "analytic"):
    """Momentum P_mu (coordinate index, lower) from the polar data and the R tensor."""
    geo = field.geometry

    def parts(y):
        return polar_parts(field.matrix(y))

    rho, beta, rotor = parts(x)
    dlog_rho = jacobian(lambda y: jnp.log(parts(y)[0]), x, mode)
    dbeta = jacobian(lambda y: parts(y)[1], x, mode)
    real, _ = r_tensor_at(lambda y: parts(y)[2], geo.omega(x, mode), x, mode)
    e_up, e_down = geo.tetrad.e_up(x), geo.tetrad.e_down(x)

    v, s = _frame_vectors(rotor)
    v_lo, s_lo = ETA @ v, ETA @ s
    tangent = jnp.einsum("ijm,mc->ijc", real, e_up)
    trace_vec = jnp.einsum("iac,ac->i", tangent, ETA)
    up = jnp.einsum("ai,bj,ck,ijk->abc", ETA, ETA, ETA, tangent)
    dual_vec = 0.5 * jnp.einsum("iabc,abc->i", LEVI_CIVITA, up)
    d_beta = e_up.T @ dbeta
    d_log = e_up.T @ dlog_rho

    k = dual_vec - d_beta
    grad = d_log + trace_vec
    spin_part = (k @ v) * s - (k @ s) * v - jnp.einsum("m,a,n,mane->e", grad, s_lo, v_lo, LEVI_CIVITA_UP)
    p_up = consts.mc * jnp.cos(beta) * v + 0.5 * consts.hbar * spin_part
    return jnp.einsum("am,a->m", e_down, ETA @ p_up)


def _spatial_cross(a, b):
    return jnp.cross(a, b)


def cartesian_component_route(field: SpinorField, consts: Constants, x, mode: str = "analytic"):
    """A_mu (lower) from velocity, spin, angle and the e1/e2 frame, cartesian chart only."""

    def fields(y):
        return bilinear_parts(field.matrix(y))

    rho, beta, v, s, e1, e2 = fields(x)
    dbeta = jacobian(lambda y: fields(y)[1], x, mode)
    de1 = jacobian(lambda y: fields(y)[4], x, mode)
    e2_de1 = jnp.real(jnp.einsum("ij,jim->m", e2, de1)) / 4.0

    def spin_flux(y):
        r, _, vv, ss, _, _ = fields(y)
        return r * (ss[1:] + _spatial_cross(vv[1:], _spatial_cross(ss[1:], vv[1:]))) / vv[0]

    def spin_velocity(y):
        r, _, vv, ss, _, _ = fields(y)
        return r * _spatial_cross(ss[1:], vv[1:])

    d_flux = jacobian(spin_flux, x, mode)  # [k, mu]
    d_sv = jacobian(spin_velocity, x, mode)
    flux = spin_flux(x) / rho
    curl = jnp.array(
        [d_flux[2, 2] - d_flux[1, 3], d_flux[0, 3] - d_flux[2, 1], d_flux[1, 1] - d_flux[0, 2]]
    )
    div_sv = d_sv[0, 1] + d_sv[1, 2] + d_sv[2, 3]
    v_lo, s_lo = ETA @ v, ETA @ s
    s_db, v_db = s @ dbeta, v @ dbeta
    cosb = jnp.cos(beta)
    hh = 0.5 * consts.hbar
    a0 = hh * (-flux @ dbeta[1:] - e2_de1[0] + div_sv / rho) - consts.mc * v[0] * cosb
    ak = (
        hh * (-v_lo[1:] * s_db + s_lo[1:] * v_db - e2_de1[1:] - curl / rho - d_sv[:, 0] / rho)
        - consts.mc * v_lo[1:] * cosb
    )
    return jnp.concatenate([a0[None], ak]) / consts.q


def _covariant_kernel(field, consts, mode):
    def kernel(x):
        q_aslash, a_matrix = matrix_route(field, consts, x, mode)
        p_comp = component_route(field, consts, x, mode)
        return {
            "A_matrix": a_matrix,
            "A_component": -p_comp / consts.q,
            "P": p_comp,
            "basis": basis_project(q_aslash),
        }

    return kernel


def _cartesian_kernel(field, consts, mode):
    def kernel(x):
        q_aslash, a_matrix = matrix_route(field, consts, x, mode)
        return {
            "A_matrix": a_matrix,
            "A_component": cartesian_component_route(field, consts, x, mode),
            "basis": basis_project(q_aslash),
        }

    return kernel


@lru_cache(maxsize=128)
def compiled_kernel(field: SpinorField, consts: Constants, mode: str, route: str, batched: bool = False):
    """Jitted (optionally vmapped) inversion kernel, cached per field, constants and mode."""
    check_mode(mode)
    build = {"covariant": _covariant_kernel, "cartesian": _cartesian_kernel}[route]
    fn = build(field, consts, mode)
    return jax.jit(jax.vmap(fn) if batched else fn)


# ---------------------------------------------------------------- checked API


@dataclass(frozen=True)
class PotentialField:
    """Inverted potential at one point, with the diagnostics of both routes."""

    A: np.ndarray
    A_component: np.ndarray
    P: np.ndarray | None
    imaginary_residue: float
    path_difference: float
    purity: float
    vector_imaginary: float
    basis: np.ndarray = field(repr=False)
    mode: str = "analytic"

    def as_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "A_component": self.A_component.tolist(),
            "P": None if self.P is None else self.P.tolist(),
            "imaginary_residue": self.imaginary_residue,
            "path_difference": self.path_difference,
            "purity": self.purity,
            "vector_imaginary": self.vector_imaginary,
            "mode": self.mode,
        }


def _summarize(out: dict, consts: Constants, mode: str, q_scale: float) -> PotentialField:
    a_matrix = np.asarray(out["A_matrix"])
    a_comp = np.asarray(out["A_component"])
    basis = np.asarray(out["basis"])
    purity = float(np.abs(basis[list(NON_VECTOR_SLOTS)]).max()) / q_scale
    vec_imag = float(np.abs(basis[list(VECTOR_SLOTS)].imag).max()) / q_scale
    p = out.get("P")
    return PotentialField(
        A=a_matrix.real.copy(),
        A_component=a_comp.real.copy(),
        P=None if p is None else np.asarray(p),
        imaginary_residue=float(np.abs(a_matrix.imag).max()),
        path_difference=float(np.abs(a_matrix.real - a_comp).max()),
        purity=purity,
        vector_imaginary=vec_imag,
        basis=basis,
        mode=mode,
    )


def _check_paths(res: PotentialField, consts: Constants, tol: float | None) -> None:
    tol = PATH_TOLERANCE[res.mode] if tol is None else tol
    scale = max(consts.potential_scale, float(np.abs(res.A).max()))
    if res.path_difference > tol * scale:
        raise PathDisagreement(
            f"matrix and component routes differ by {res.path_difference:.3e} "
            f"(tolerance {tol * scale:.3e}, derivatives {res.mode})"
        )


def invert_covariant(
    field: SpinorField,
    consts: Constants,
    p: ChartPoint,
    mode: str = "analytic",
    tol: float | None = None,
) -> PotentialField:
    """Potential A_mu = -P_mu / q on any chart; both routes must agree."""
    x = jnp.asarray(p.coords)
    require_nonsingular(field.matrix(x), where=str(p.coords.tolist()))
    out = compiled_kernel(field, consts, mode, "covariant")(x)
    res = _summarize(out, consts, mode, abs(consts.q))
    _check_paths(res, consts, tol)
    return res


def invert_cartesian(
    field: SpinorField,
    consts: Constants,
    p: ChartPoint,
    mode: str = "analytic",
    tol: float | None = None,
    purity_tol: float | None = None,
) -> PotentialField:
    """Potential on a cartesian chart by the direct formula and the component formulas."""
    if field.chart.kind != "cartesian":
        raise DomainError("cartesian inversion needs a cartesian chart")
    x = jnp.asarray(p.coords)
    require_nonsingular(field.matrix(x), where=str(p.coords.tolist()))
    out = compiled_kernel(field, consts, mode, "cartesian")(x)
    res = _summarize(out, consts, mode, abs(consts.q))
    ptol = PURITY_TOLERANCE[mode] if purity_tol is None else purity_tol
    scale = max(consts.potential_scale, float(np.abs(res.A).max()))
    if max(res.purity, res.vector_imaginary) > ptol * scale:
        raise ConstraintViolation(
            f"inverted potential is not a pure real vector (forbidden part {res.purity:.3e}, "
            f"imaginary vector part {res.vector_imaginary:.3e})"
        )
    _check_paths(res, consts, tol)
    return res


# ---------------------------------------------------------------- constraints


def _current_divergence(field: SpinorField, which: int, x, mode: str):
    """Covariant divergence of rho * (velocity or spin), using sqrt|g| d(sqrt|g| J)."""
    geo = field.geometry

    def density(y):
        rho, _, v, s, _, _ = bilinear_parts(field.matrix(y))
        vec = v if which == 0 else s
        return geo.chart.volume_element(y) * (geo.tetrad.e_up(y) @ (rho * vec))

    d = jacobian(density, x, mode)
    return jnp.trace(d) / geo.chart.volume_element(x)


def constraint_kernel(field: SpinorField, consts: Constants, mode: str = "analytic"):
    def kernel(x):
        rho, beta, _, _, _, _ = bilinear_parts(field.matrix(x))
        c1 = _current_divergence(field, 0, x, mode)
        div_s = _current_divergence(field, 1, x, mode)
        mass = 2.0 * consts.inverse_compton * rho * jnp.sin(beta)
        norm = rho * consts.inverse_compton
        return {"c1": c1, "c2": div_s + mass, "spin_divergence": div_s, "mass_term": mass, "norm": norm}

    return kernel


@lru_cache(maxsize=128)
def compiled_constraints(field: SpinorField, consts: Constants, mode: str, batched: bool = False):
    fn = constraint_kernel(field, consts, check_mode(mode))
    return jax.jit(jax.vmap(fn) if batched else fn)


@dataclass(frozen=True)
class ConstraintResiduals:
    """Continuity residuals; ``*_relative`` divide by rho mc / hbar."""

    c1: float
    c2: float
    spin_divergence: float
    mass_term: float
    c1_relative: float
    c2_relative: float

    def __iter__(self):
        return iter((self.c1, self.c2))


def constraint_residuals(field: SpinorField, consts: Constants, p: ChartPoint, mode: str = "analytic") -> ConstraintResiduals:
    x = jnp.asarray(p.coords)
    require_nonsingular(field.matrix(x), where=str(p.coords.tolist()))
    out = {k: float(v) for k, v in compiled_constraints(field, consts, mode)(x).items()}
    return ConstraintResiduals(
        c1=out["c1"],
        c2=out["c2"],
        spin_divergence=out["spin_divergence"],
        mass_term=out["mass_term"],
        c1_relative=out["c1"] / out["norm"],
        c2_relative=out["c2"] / out["norm"],
    )


# ---------------------------------------------------------------- geometrical identities


def transport_residual(field: SpinorField, p: ChartPoint, mode: str = "fd", rtensor_mode: str = "analytic") -> tuple[float, float]:
    """max |d_mu v_i + Omega_{ij mu} v^j + R_{ij mu} v^j| and the spin analogue.

    The derivatives of v and s use ``mode`` while the R tensor uses
    ``rtensor_mode``, so the default compares a finite-difference transport
    against the exact connection.
    """
    geo = field.geometry
    x = jnp.asarray(p.coords)
    require_nonsingular(field.matrix(x))

    def rotor(y):
        return polar_parts(field.matrix(y))[2]

    def lowered(y):
        v, s = _frame_vectors(rotor(y))
        return jnp.stack([ETA @ v, ETA @ s])

    omega = geo.omega(x, rtensor_mode)
    real, _ = r_tensor_at(rotor, omega, x, rtensor_mode)
    d = jacobian(lowered, x, mode)  # [k, i, mu]
    v, s = _frame_vectors(rotor(x))
    conn = omega + real
    res_v = d[0] + jnp.einsum("ijm,j->im", conn, v)
    res_s = d[1] + jnp.einsum("ijm,j->im", conn, s)
    return float(jnp.max(jnp.abs(res_v))), float(jnp.max(jnp.abs(res_s)))


__all__ = [
    "Constants",
    "SpinorField",
    "RTensor",
    "PotentialField",
    "ConstraintResiduals",
    "r_tensor",
    "r_tensor_at",
    "matrix_route",
    "component_route",
    "cartesian_component_route",
    "compiled_kernel",
    "compiled_constraints",
    "invert_covariant",
    "invert_cartesian",
    "constraint_residuals",
    "transport_residual",
    "PATH_TOLERANCE",
]
