"""Flat-spacetime charts, tetrad fields, spin connections and curved gamma matrices.

Coordinates are (x^0, x^1, x^2, x^3) with x^0 = c t. Index layouts used throughout:
``e_up[mu, a] = e^mu_a``, ``e_down[a, mu] = e^a_mu``, ``christoffel[s, m, n] = Gamma^s_{mn}``,
``omega[i, j, mu] = Omega_{ij mu}`` (tangent indices lowered).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._backend import jax, jnp
from .clifford import ETA, GAMMA, GAMMA_UP, IDENTITY, SIGMA_UP, commutator, tilde
from .diff import jacobian
from .errors import DomainError

CHART_KINDS = ("cartesian", "spherical")


@dataclass(frozen=True)
class Chart:
    """Flat chart with its axis and origin exclusion margins."""

    kind: str = "spherical"
    r_min: float = 1e-6
    theta_min: float = 1e-3

    def __post_init__(self):
        if self.kind not in CHART_KINDS:
            raise ValueError(f"chart must be one of {CHART_KINDS}, got {self.kind!r}")

    @property
    def labels(self) -> tuple[str, str, str, str]:
        return ("t", "x", "y", "z") if self.kind == "cartesian" else ("t", "r", "theta", "phi")

    def validate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (4,) or not np.all(np.isfinite(x)):
            raise DomainError(f"coordinates must be 4 finite reals, got {x!r}")
        if self.kind == "spherical":
            r, th = x[1], x[2]
            if not r > self.r_min:
                raise DomainError(f"r = {r} is inside the origin margin {self.r_min}")
            if not (self.theta_min <= th <= np.pi - self.theta_min):
                raise DomainError(f"theta = {th} is inside the axis margin {self.theta_min}")
        return x

    def metric(self, x):
        if self.kind == "cartesian":
            return jnp.asarray(ETA)
        r, th = x[1], x[2]
        return jnp.diag(jnp.array([1.0, -1.0, -(r**2), -((r * jnp.sin(th)) ** 2)]))

    def christoffel(self, x):
        """Closed-form Gamma^s_{mn} of the flat chart."""
        if self.kind == "cartesian":
            return jnp.zeros((4, 4, 4))
        r, th = x[1], x[2]
        s, c = jnp.sin(th), jnp.cos(th)
        z = jnp.zeros(())
        one_r = 1.0 / r
        cot = c / s
        g = jnp.zeros((4, 4, 4))
        g = g.at[2, 2, 1].set(one_r).at[2, 1, 2].set(one_r)
        g = g.at[3, 3, 1].set(one_r).at[3, 1, 3].set(one_r)
        g = g.at[1, 2, 2].set(-r)
        g = g.at[1, 3, 3].set(-r * s * s)
        g = g.at[3, 3, 2].set(cot).at[3, 2, 3].set(cot)
        g = g.at[2, 3, 3].set(-c * s + z)
        return g

    def volume_element(self, x):
        if self.kind == "cartesian":
            return jnp.ones(())
        return x[1] ** 2 * jnp.sin(x[2])

    def to_cartesian(self, x):
        return jnp.asarray(x) if self.kind == "cartesian" else spherical_to_cartesian(x)

    def to_spherical(self, x):
        return cartesian_to_spherical(x) if self.kind == "cartesian" else jnp.asarray(x)


def spherical_to_cartesian(x):
    t, r, th, ph = x[0], x[1], x[2], x[3]
    return jnp.array([t, r * jnp.sin(th) * jnp.cos(ph), r * jnp.sin(th) * jnp.sin(ph), r * jnp.cos(th)])


def cartesian_to_spherical(x):
    t, a, b, c = x[0], x[1], x[2], x[3]
    r = jnp.sqrt(a * a + b * b + c * c)
    return jnp.array([t, r, jnp.arccos(c / r), jnp.arctan2(b, a)])


@dataclass(frozen=True)
class ChartPoint:
    chart: Chart
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", self.chart.validate(self.coords))


def metric_and_christoffels(p: ChartPoint) -> tuple[np.ndarray, np.ndarray]:
    x = jnp.asarray(p.coords)
    return np.asarray(p.chart.metric(x)), np.asarray(p.chart.christoffel(x))


def christoffel_from_metric(metric: Callable, x, mode: str = "analytic"):
    """Levi-Civita symbols from derivatives of a metric field."""
    g = metric(x)
    dg = jacobian(metric, x, mode)  # dg[l, n, m] = d_m g_{ln}
    ginv = jnp.linalg.inv(g)
    lower = 0.5 * (jnp.einsum("lnm->lmn", dg) + jnp.einsum("lmn->lmn", dg) - jnp.einsum("mnl->lmn", dg))
    return jnp.einsum("sl,lmn->smn", ginv, lower)


@dataclass(frozen=True)
class Tetrad:
    """Frame components at one point."""

    e_down: np.ndarray
    e_up: np.ndarray

    def metric(self) -> np.ndarray:
        return self.e_down.T @ ETA @ self.e_down

    def duality_error(self) -> float:
        return float(max(np.abs(self.e_up @ self.e_down - np.eye(4)).max(), np.abs(self.e_down @ self.e_up - np.eye(4)).max()))


@dataclass(frozen=True)
class TetradField:
    """A tetrad as a function of coordinates, given through e^mu_a."""

    up: Callable
    name: str = "tetrad"

    def e_up(self, x):
        return self.up(x)

    def e_down(self, x):
        return jnp.linalg.inv(self.up(x))

    def at(self, p: ChartPoint) -> Tetrad:
        x = jnp.asarray(p.coords)
        return Tetrad(e_down=np.asarray(self.e_down(x)), e_up=np.asarray(self.e_up(x)))


def _identity_up(x):
    return jnp.eye(4) + 0.0 * x[0]


def _spherical_up(x):
    r, th, ph = x[1], x[2], x[3]
    st, ct, sp, cp = jnp.sin(th), jnp.cos(th), jnp.sin(ph), jnp.cos(ph)
    zero = jnp.zeros(())
    return jnp.array(
        [
            [1.0 + zero, zero, zero, zero],
            [zero, cp * st, sp * st, ct],
            [zero, ct * cp / r, ct * sp / r, -st / r],
            [zero, -sp / (r * st), cp / (r * st), zero],
        ]
    )


CARTESIAN_TETRAD = TetradField(_identity_up, "cartesian")
SPHERICAL_TETRAD = TetradField(_spherical_up, "spherical")


def default_tetrad(chart: Chart) -> TetradField:
    return CARTESIAN_TETRAD if chart.kind == "cartesian" else SPHERICAL_TETRAD


@dataclass(frozen=True)
class Geometry:
    """A chart together with the tetrad field used to read tangent components."""

    chart: Chart
    tetrad: TetradField

    @classmethod
    def flat(cls, kind: str = "spherical", **margins) -> "Geometry":
        chart = Chart(kind, **margins)
        return cls(chart, default_tetrad(chart))

    def omega(self, x, mode: str = "analytic"):
        return spin_connection_at(self.tetrad, self.chart, x, mode)

    def point(self, coords) -> ChartPoint:
        return ChartPoint(self.chart, coords)


def spherical_tetrad(p: ChartPoint) -> Tetrad:
    if p.chart.kind != "spherical":
        raise DomainError("spherical tetrad needs a spherical chart point")
    return SPHERICAL_TETRAD.at(p)


def spin_connection_at(tetrad: TetradField, chart: Chart, x, mode: str = "analytic"):
    """Omega_{ij mu} = eta_ik e^nu_j (e^k_s Gamma^s_{nu mu} - d_mu e^k_nu) (traceable)."""
    eu = tetrad.e_up(x)
    ed = tetrad.e_down(x)
    gam = chart.christoffel(x)
    ded = jacobian(tetrad.e_down, x, mode)  # [k, nu, mu]
    mixed = jnp.einsum("nj,ks,snm->kjm", eu, ed, gam) - jnp.einsum("nj,knm->kjm", eu, ded)
    return jnp.einsum("ik,kjm->ijm", ETA, mixed)


@dataclass(frozen=True)
class SpinConnection:
    omega: np.ndarray

    def antisymmetry_error(self) -> float:
        return float(np.abs(self.omega + self.omega.transpose(1, 0, 2)).max())


def spin_connection(tetrad: TetradField, p: ChartPoint, mode: str = "analytic") -> SpinConnection:
    om = spin_connection_at(tetrad, p.chart, jnp.asarray(p.coords), mode)
    return SpinConnection(np.asarray(om))


def omega_matrices(omega):
    """Omega_mu = Omega_{ij mu} sigma^{ij} / 2 for each coordinate mu."""
    return 0.5 * jnp.einsum("ijm,ijab->mab", omega, SIGMA_UP)


def curved_gammas(e_up, e_down):
    """(gamma_mu, gamma^mu) built from a frame."""
    lower = jnp.einsum("am,aij->mij", e_down, GAMMA)
    upper = jnp.einsum("ma,aij->mij", e_up, GAMMA_UP)
    return lower, upper


def curved_gamma(tetrad: TetradField, p: ChartPoint) -> tuple[np.ndarray, np.ndarray]:
    x = jnp.asarray(p.coords)
    lo, up = curved_gammas(tetrad.e_up(x), tetrad.e_down(x))
    return np.asarray(lo), np.asarray(up)


def metricity_residual_at(tetrad: TetradField, chart: Chart, x, omega=None, mode: str = "analytic"):
    """max |d_mu gamma_nu + [Omega_mu, gamma_nu] - Gamma^s_{nu mu} gamma_s| (traceable)."""
    if omega is None:
        omega = spin_connection_at(tetrad, chart, x, mode)
    lower = lambda y: curved_gammas(tetrad.e_up(y), tetrad.e_down(y))[0]  # noqa: E731
    g_lo = lower(x)
    dg = jacobian(lower, x, mode)  # [nu, i, j, mu]
    om = omega_matrices(omega)
    comm = jnp.einsum("mik,nkj->mnij", om, g_lo) - jnp.einsum("nik,mkj->mnij", g_lo, om)
    chris = jnp.einsum("snm,sij->mnij", chart.christoffel(x), g_lo)
    res = jnp.einsum("nijm->mnij", dg) + comm - chris
    return jnp.max(jnp.abs(res))


def metricity_residual(tetrad: TetradField, p: ChartPoint, omega=None, mode: str = "fd") -> float:
    om = None if omega is None else jnp.asarray(omega)
    return float(metricity_residual_at(tetrad, p.chart, jnp.asarray(p.coords), om, mode))


def metricity_sweep(tetrad: TetradField, chart: Chart, points, mode: str = "fd") -> np.ndarray:
    """Metricity residual of a tetrad and its own connection at many points in one compiled pass."""
    for x in np.asarray(points):
        ChartPoint(chart, x)
    fn = jax.jit(jax.vmap(lambda x: metricity_residual_at(tetrad, chart, x, None, mode)))
    return np.asarray(fn(jnp.asarray(points, dtype=jnp.float64)))


def rotated_tetrad(rotor: Callable, base: TetradField, name: str = "rotated") -> TetradField:
    """Frame e'^mu_a = Tr(R^-1 gamma^mu R gamma_a)/4 seen by the rotor field R."""

    def up(x):
        r = rotor(x)
        r_inv = tilde(r)
        _, g_up = curved_gammas(base.e_up(x), base.e_down(x))
        return jnp.real(jnp.einsum("ij,mjk,kl,ali->ma", r_inv, g_up, r, GAMMA)) / 4.0

    return TetradField(up, name)


def tetrad_from_rotor(rotor: Callable, base: TetradField, p: ChartPoint, tol: float = 1e-10) -> Tetrad:
    x = jnp.asarray(p.coords)
    r = np.asarray(rotor(x))
    if np.abs(r @ np.asarray(tilde(r)) - IDENTITY).max() > tol:
        raise ValueError("rotor is not unimodular (R R~ != 1)")
    return rotated_tetrad(rotor, base).at(p)


def rotor_connection_at(rotor: Callable, x, base_omega=None, mode: str = "analytic"):
    """Connection seen in the frame rotated by R: projection of R^-1 (d + Omega_base) R onto sigma^{ij}."""
    r = rotor(x)
    dr = jacobian(rotor, x, mode)
    r_inv = tilde(r)
    mats = jnp.einsum("ij,jkm->mik", r_inv, dr)
    if base_omega is not None:
        mats = mats + jnp.einsum("ij,mjk,kl->mil", r_inv, omega_matrices(base_omega), r)
    # Omega_mu = Omega_{ij mu} sigma^{ij}/2 and Tr(sigma^{ij} sigma_{kl})/4 = -delta/2 per ordered pair.
    sig_lo = jnp.einsum("ac,bd,cdij->abij", ETA, ETA, SIGMA_UP)
    return -jnp.real(jnp.einsum("mij,klji->klm", mats, sig_lo))


__all__ = [
    "Chart",
    "ChartPoint",
    "spherical_to_cartesian",
    "cartesian_to_spherical",
    "Tetrad",
    "Geometry",
    "TetradField",
    "SpinConnection",
    "CARTESIAN_TETRAD",
    "SPHERICAL_TETRAD",
    "default_tetrad",
    "metric_and_christoffels",
    "christoffel_from_metric",
    "spherical_tetrad",
    "spin_connection",
    "spin_connection_at",
    "omega_matrices",
    "curved_gammas",
    "curved_gamma",
    "metricity_residual",
    "metricity_residual_at",
    "metricity_sweep",
    "rotated_tetrad",
    "tetrad_from_rotor",
    "rotor_connection_at",
]
