"""Solution families, the radial constraint integrator, rest frames and field strengths.

Every family is written as a traceable function of spherical coordinates
(x^0 = ct, r, theta, phi); a cartesian chart composes it with the coordinate
change. Parameters come from :class:`SolutionConfig`, which is also the
``solution`` block of the command-line configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal, Optional

import numpy as np
import sympy
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import solve_ivp

from ._backend import jax, jnp
from .clifford import GAMMA, PHASE_GEN, boost_exp, rotation_exp, tilde
from .diff import DEFAULT_STEP, check_mode, jacobian
from .errors import ConfigError, DomainError, IntegrationError, PathDisagreement
from .geometry import (
    Chart,
    ChartPoint,
    Geometry,
    SpinConnection,
    Tetrad,
    TetradField,
    cartesian_to_spherical,
    default_tetrad,
    rotated_tetrad,
    spin_connection,
)
from .inversion import Constants, SpinorField, matrix_route
from .spinor import MatrixSpinor, pseudoscalar_exp, require_nonsingular

FAMILIES = (
    "general_ansatz",
    "planar_2d",
    "hydrogen",
    "zero_beta",
    "zero_beta_uniform_b",
    "zero_beta_coulomb_solenoid",
    "rest_frame_of",
)
FINE_STRUCTURE = 1.0 / 137.035999
ARCCOS_CLAMP = 1e-12

_G10 = GAMMA[1] @ GAMMA[0]
_G20 = GAMMA[2] @ GAMMA[0]
_G31 = GAMMA[3] @ GAMMA[1]


# ---------------------------------------------------------------- configuration


class ConstantsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    hbar: float = Field(1.0, gt=0)
    c: float = Field(1.0, gt=0)
    m: float = Field(1.0, gt=0)
    q: float = 1.0

    @model_validator(mode="after")
    def _charge(self):
        if self.q == 0:
            raise ValueError("charge q must be nonzero")
        return self

    def build(self) -> Constants:
        return Constants(self.hbar, self.c, self.m, self.q)


class SolutionConfig(BaseModel):
    """Family tag plus every family parameter; unused parameters are ignored by the builders."""

    model_config = ConfigDict(extra="forbid")

    family: Literal[FAMILIES]  # type: ignore[valid-type]
    chart: Literal["spherical", "cartesian"] = "spherical"
    constants: ConstantsConfig = ConstantsConfig()
    kappa: float = Field(1.0, gt=0)
    epsilon: Optional[float] = None
    Z: float = Field(1.0, gt=0)
    alpha: float = Field(FINE_STRUCTURE, gt=0)
    a: float = 0.6
    loop_current: float = 1.0
    permeability: float = Field(1.0, gt=0)
    loop_radius: float = Field(1.0, gt=0)
    coulomb_strength: Optional[float] = None
    G: Optional[str] = None
    f: Optional[str] = None
    g: Optional[str] = None
    rho: Optional[str] = None
    profile: Literal["constant", "ode"] = "constant"
    potential: Optional[str] = None
    X0: Optional[float] = None
    r0: float = Field(1.0, gt=0)
    G0: float = 0.0
    r_span: tuple[float, float] = (0.05, 60.0)
    r_min: float = Field(1e-6, gt=0)
    theta_min: float = Field(1e-3, ge=0)
    inner: Optional["SolutionConfig"] = None

    @model_validator(mode="after")
    def _family_invariants(self):
        fam = self.family
        if fam == "hydrogen" and not (0.0 < self.Z * self.alpha < 1.0):
            raise ValueError("hydrogen needs 0 < Z alpha < 1")
        if fam in ("zero_beta", "zero_beta_coulomb_solenoid") and not (0.0 < self.a < 1.0):
            raise ValueError("zero-beta families need 0 < a < 1")
        if fam == "rest_frame_of":
            if self.inner is None:
                raise ValueError("rest_frame_of needs an inner solution")
            if self.inner.family == "rest_frame_of":
                raise ValueError("rest frames do not nest")
        lo, hi = self.r_span
        if not (0.0 < lo < hi):
            raise ValueError("r_span must satisfy 0 < r_lo < r_hi")
        if self.profile == "ode" and not (lo <= self.r0 <= hi):
            raise ValueError("r0 must lie inside r_span")
        return self

    @property
    def consts(self) -> Constants:
        return self.constants.build()

    @property
    def loop_field(self) -> float:
        """i mu0 / (2 R), the only observable loop combination."""
        return self.loop_current * self.permeability / (2.0 * self.loop_radius)


SolutionConfig.model_rebuild()


# ---------------------------------------------------------------- expressions

_COORD_NAMES = ("t", "r", "theta", "phi", "x", "y", "z", "s")


def compile_expression(text: str, consts: Constants, extra: Optional[dict] = None, allowed=_COORD_NAMES):
    """Parse a sympy expression of the coordinates into a traceable function ``fn(t, r, theta, phi)``.

    Symbols x, y, z and the cylindrical radius s are expanded from the spherical
    coordinates; hbar, c, m, q and any ``extra`` numbers are substituted.
    """
    syms = {name: sympy.Symbol(name, real=True) for name in _COORD_NAMES}
    try:
        expr = sympy.sympify(text, locals=dict(syms))
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc}") from exc
    numbers = {"hbar": consts.hbar, "c": consts.c, "m": consts.m, "q": consts.q, "pi": math.pi}
    numbers.update(extra or {})
    expr = expr.subs({sympy.Symbol(k): v for k, v in numbers.items()})
    expr = expr.subs({sympy.Symbol(k): syms[k] for k in _COORD_NAMES})
    unknown = {str(s) for s in expr.free_symbols} - set(allowed)
    if unknown:
        raise ConfigError(f"expression {text!r} uses unknown symbols {sorted(unknown)}")
    t, r, th, ph = (syms[k] for k in ("t", "r", "theta", "phi"))
    expr = expr.subs(
        {
            syms["x"]: r * sympy.sin(th) * sympy.cos(ph),
            syms["y"]: r * sympy.sin(th) * sympy.sin(ph),
            syms["z"]: r * sympy.cos(th),
            syms["s"]: r * sympy.sin(th),
        }
    )
    raw = sympy.lambdify((t, r, th, ph), expr, modules="jax")

    def fn(t_, r_, th_, ph_):
        return jnp.asarray(raw(t_, r_, th_, ph_), dtype=jnp.float64) + 0.0 * r_

    fn.expr = expr
    return fn


def compile_radial(text: str, consts: Constants, extra: Optional[dict] = None):
    """Radial function and its first derivative from a sympy expression in r."""
    fn = compile_expression(text, consts, extra, allowed=("r",))
    r = sympy.Symbol("r", real=True)
    d_expr = sympy.diff(fn.expr, r)
    raw_d = sympy.lambdify(r, d_expr, modules="jax")

    def value(r_):
        return fn(0.0, r_, 0.0, 0.0)

    def derivative(r_):
        return jnp.asarray(raw_d(r_), dtype=jnp.float64) + 0.0 * r_

    return value, derivative


# ---------------------------------------------------------------- general ansatz


def azimuthal_boost(w, phi):
    return boost_exp(0.5 * w, -jnp.sin(phi) * _G10 + jnp.cos(phi) * _G20)


def tilt_angle(beta, w):
    """arctan(tan(beta/2) tanh(w/2)), half the precession angle of the spin."""
    return jnp.arctan(jnp.tan(0.5 * beta) * jnp.tanh(0.5 * w))


def energy_phase(x0, eps, consts: Constants):
    return rotation_exp(-eps * x0 / (consts.hbar * consts.c), PHASE_GEN)


def general_rest_rotor(beta, w, phi):
    """Boost times the rotation part that carries the velocity and spin frame."""
    return azimuthal_boost(w, phi) @ rotation_exp(-0.5 * phi, PHASE_GEN) @ rotation_exp(tilt_angle(beta, w), _G31)


def general_rotor(beta, w, phi):
    return general_rest_rotor(beta, w, phi) @ rotation_exp(0.5 * phi, PHASE_GEN)


def general_matrix(sqrt_rho, beta, w, phi, x0, eps, consts: Constants):
    """sqrt(rho) exp(I beta/2) B U exp(-gamma_2 gamma_1 eps t / hbar)."""
    return sqrt_rho * pseudoscalar_exp(0.5 * beta) @ general_rotor(beta, w, phi) @ energy_phase(x0, eps, consts)


def theta_angle_argument(f, g):
    """Cosine of the precession angle, (cos b + sech w)/(1 + cos b sech w) with b = arctan g, w = artanh f."""
    cb = 1.0 / np.sqrt(1.0 + np.square(g))
    sw = np.sqrt(1.0 - np.square(f))
    return (cb + sw) / (1.0 + cb * sw)


def clamped_arccos(arg, clamp: float = ARCCOS_CLAMP) -> np.ndarray:
    """arccos that clamps round-off excursions beyond [-1, 1] up to ``clamp`` and rejects larger ones."""
    arg = np.asarray(arg, dtype=float)
    if not np.all(np.isfinite(arg)):
        raise DomainError("arccos argument is not finite")
    excess = np.max(np.abs(arg)) - 1.0
    if excess > clamp:
        raise DomainError(f"arccos argument leaves [-1, 1] by {excess:.3e}")
    return np.arccos(np.clip(arg, -1.0, 1.0))


def _check_rapidity(f) -> None:
    if not np.all(np.abs(np.asarray(f)) < 1.0):
        raise DomainError("|f| must be < 1 (the boost would be superluminal)")


def theta_angle(f, g, clamp: float = ARCCOS_CLAMP) -> np.ndarray:
    """Precession angle of the spin for rapidity artanh f and angle arctan g."""
    _check_rapidity(f)
    return clamped_arccos(theta_angle_argument(f, g), clamp)


def build_general(cfg: SolutionConfig, f: Callable, g: Callable, rho: Callable, p: ChartPoint) -> MatrixSpinor:
    """Checked evaluation of the general ansatz at one point.

    ``f``, ``g`` and ``rho`` are functions of spherical coordinates ``(t, r, theta, phi)``.
    """
    consts = cfg.consts
    sph = np.asarray(p.chart.to_spherical(jnp.asarray(p.coords)))
    fv, gv, rv = (float(fn(*sph)) for fn in (f, g, rho))
    _check_rapidity(fv)
    if not rv > 0:
        raise DomainError("density must be positive")
    theta_angle(fv, gv)
    eps = consts.m * consts.c**2 if cfg.epsilon is None else cfg.epsilon
    m = general_matrix(math.sqrt(rv), math.atan(gv), math.atanh(fv), sph[3], sph[0], eps, consts)
    return MatrixSpinor(np.asarray(m))


# ---------------------------------------------------------------- radial profiles


@dataclass(frozen=True)
class RadialProfiles:
    """Solutions X(r), G(r) of the radial constraints, with the Riccati variable.

    ``X``, ``G`` and ``riccati`` evaluate the dense-output interpolants with
    numpy; ``X_traced`` and ``G_traced`` are jax-traceable versions whose
    derivatives come from the ODE right-hand side.
    """

    r_span: tuple[float, float]
    X: Callable
    G: Callable
    riccati: Callable
    X_traced: Callable
    G_traced: Callable
    route_difference: float
    evaluations: int

    def X_from_riccati(self, r):
        return riccati_to_x(self.riccati(r))


def riccati_to_x(z):
    """X = -csch(2 artanh Z), written as (Z^2 - 1)/(2Z) so it also covers |Z| > 1."""
    z = np.asarray(z, dtype=float)
    return (z * z - 1.0) / (2.0 * z)


def x_to_riccati(x):
    """Branch Z = X + sqrt(1 + X^2) > 0 of the inverse map."""
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0, x + np.sqrt(1.0 + x * x), 1.0 / (np.sqrt(1.0 + x * x) - x))


def _direct_rhs(potential, eps, consts: Constants):
    k = consts.m * consts.c / consts.hbar

    def rhs(r, X):
        s = jnp.sqrt(1.0 + X * X)
        w = eps / (consts.hbar * consts.c) + potential(r) / consts.hbar
        dx = -2.0 * s / r * (r * w * s - 1.0 - k * r * X)
        dg = 2.0 * (k * s - X * w)
        return dx, dg

    return rhs


def _riccati_rhs(potential, eps, consts: Constants):
    c, h, m = consts.c, consts.hbar, consts.m

    def rhs(r, z):
        v = potential(r)
        minus = (c * c * m - c * v - eps) / (c * h)
        plus = (c * c * m + c * v + eps) / (c * h)
        return z * z * minus - plus + 2.0 * z / r, z * minus + plus / z

    return rhs


def _integrate(fun, r0, y0, r_end, events=None, rtol=1e-10, atol=1e-12):
    if r_end == r0:
        return None
    sol = solve_ivp(fun, (r0, r_end), y0, method="DOP853", rtol=rtol, atol=atol, dense_output=True, events=events)
    if sol.status == 1:
        where = [float(e[0]) for e in sol.t_events if len(e)]
        raise IntegrationError(f"Riccati variable reached a pole near r = {where[0]:.6g}")
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        raise IntegrationError(f"radial integration failed: {sol.message}")
    return sol


class _Piecewise:
    """Join the inward and outward dense outputs at r0."""

    def __init__(self, r0, y0, inward, outward):
        self.r0, self.y0, self.inward, self.outward = r0, np.asarray(y0, float), inward, outward

    def __call__(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty((len(self.y0), r.size))
        flat = r.ravel()
        lo = flat < self.r0
        hi = ~lo
        for mask, part in ((lo, self.inward), (hi, self.outward)):
            if not mask.any():
                continue
            out[:, mask] = self.y0[:, None] if part is None else part.sol(flat[mask])
        return out


def _traced_profile(interp: _Piecewise, index: int, slope: Callable):
    def host(r):
        r = np.asarray(r, dtype=float)
        return interp(r.ravel())[index].reshape(r.shape)

    @jax.custom_jvp
    def value(r):
        return jax.pure_callback(host, jax.ShapeDtypeStruct(jnp.shape(r), jnp.float64), r, vmap_method="broadcast_all")

    @value.defjvp
    def _jvp(primals, tangents):
        (r,), (dr,) = primals, tangents
        return value(r), slope(r) * dr

    return value


def hydrogen_profiles(
    potential: Callable,
    eps: float,
    consts: Constants,
    r0: float,
    X0: float,
    G0: float,
    r_span: tuple[float, float],
    rtol: float = 1e-10,
    atol: float = 1e-12,
    agreement: float = 1e-8,
    samples: int = 257,
) -> RadialProfiles:
    """Integrate the X and G constraints directly and in Riccati form from r0 outward and inward.

    ``potential`` is a traceable function of r. The two routes must agree to
    ``agreement`` (relative to max(1, |X|)); otherwise PathDisagreement is raised.
    """
    lo, hi = r_span
    if not (0 < lo <= r0 <= hi):
        raise DomainError("r0 must lie inside r_span and r_span must exclude 0")
    direct = _direct_rhs(potential, eps, consts)
    ricc = _riccati_rhs(potential, eps, consts)

    def f_direct(r, y):
        return np.array([float(v) for v in direct(r, y[0])])

    def f_riccati(r, y):
        return np.array([float(v) for v in ricc(r, y[0])])

    def near_zero(r, y):
        return y[0]

    def near_infinity(r, y):
        return 1e8 - abs(y[0])

    for ev in (near_zero, near_infinity):
        ev.terminal = True

    y_direct = [X0, G0]
    z0 = float(x_to_riccati(X0))
    y_ricc = [z0, G0]
    parts_d = [_integrate(f_direct, r0, y_direct, end, rtol=rtol, atol=atol) for end in (lo, hi)]
    parts_r = [_integrate(f_riccati, r0, y_ricc, end, (near_zero, near_infinity), rtol, atol) for end in (lo, hi)]
    interp_d = _Piecewise(r0, y_direct, *parts_d)
    interp_r = _Piecewise(r0, y_ricc, *parts_r)

    nodes = np.geomspace(lo, hi, samples)
    xd, gd = interp_d(nodes)
    zr, gr = interp_r(nodes)
    xr = riccati_to_x(zr)
    diff = float(max(np.max(np.abs(xd - xr) / np.maximum(1.0, np.abs(xd))), np.max(np.abs(gd - gr))))
    if diff > agreement:
        raise PathDisagreement(f"direct and Riccati radial routes differ by {diff:.3e}")

    X_traced = _traced_profile(interp_d, 0, lambda r: direct(r, X_traced(r))[0])
    G_traced = _traced_profile(interp_d, 1, lambda r: direct(r, X_traced(r))[1])
    nfev = sum(p.nfev for p in parts_d + parts_r if p is not None)
    return RadialProfiles(
        r_span=(lo, hi),
        X=lambda r: interp_d(r)[0].reshape(np.shape(r)),
        G=lambda r: interp_d(r)[1].reshape(np.shape(r)),
        riccati=lambda r: interp_r(r)[0].reshape(np.shape(r)),
        X_traced=X_traced,
        G_traced=G_traced,
        route_difference=diff,
        evaluations=nfev,
    )


# ---------------------------------------------------------------- solution objects


@dataclass(frozen=True, eq=False)
class Solution:
    """A built family: spinor field on its geometry plus family-level extras.

    ``rotor`` is the declared rotation-boost part (without density, angle and
    energy phase); ``rest_rotor`` maps the lab frame to the rest frame;
    ``potential`` is the closed-form A_mu when the family has one.
    """

    family: str
    config: SolutionConfig
    field: SpinorField
    consts: Constants
    rotor: Optional[Callable] = None
    rest_rotor: Optional[Callable] = None
    potential: Optional[Callable] = None
    spherical_matrix: Optional[Callable] = None
    profiles: Optional[RadialProfiles] = None
    loop_field: Optional[float] = None
    r_range: tuple[float, float] = (0.0, math.inf)

    @property
    def chart(self) -> Chart:
        return self.field.chart

    @property
    def geometry(self) -> Geometry:
        return self.field.geometry

    def matrix(self, x):
        return self.field.matrix(x)

    def psi(self, x):
        return self.field.column(x)

    def point(self, coords) -> ChartPoint:
        p = self.field.point(coords)
        if self.chart.kind == "spherical" and not (self.r_range[0] <= p.coords[1] <= self.r_range[1]):
            raise DomainError(f"r = {p.coords[1]} outside the profile range {self.r_range}")
        return p

    def spinor_at(self, p: ChartPoint) -> MatrixSpinor:
        m = np.asarray(self.matrix(jnp.asarray(p.coords)))
        require_nonsingular(m, where=str(p.coords.tolist()))
        return MatrixSpinor(m)

    def inverted_potential(self, mode: str = "analytic") -> Callable:
        """Traceable A_mu from the matrix route (real part)."""
        check_mode(mode)
        return lambda x: jnp.real(matrix_route(self.field, self.consts, x, mode)[1])


def _on_chart(fn_sph: Callable, chart: Chart) -> Callable:
    if chart.kind == "spherical":
        return fn_sph
    return lambda x: fn_sph(cartesian_to_spherical(x))


def _covector_on_chart(a_sph: Callable, chart: Chart) -> Callable:
    """Pull a covariant spherical field back to the chart."""
    if chart.kind == "spherical":
        return a_sph

    def a_cart(x):
        jac = jax.jacfwd(cartesian_to_spherical)(x)  # [mu_sph, i_cart]
        return a_sph(cartesian_to_spherical(x)) @ jac

    return a_cart


def _make_solution(cfg, family, matrix_sph, rotor_sph=None, rest_sph=None, potential_sph=None, **extra) -> Solution:
    chart = Chart(cfg.chart, r_min=cfg.r_min, theta_min=cfg.theta_min)
    geo = Geometry(chart, default_tetrad(chart))
    field = SpinorField(_on_chart(matrix_sph, chart), geo, family)
    return Solution(
        family=family,
        config=cfg,
        field=field,
        consts=cfg.consts,
        rotor=None if rotor_sph is None else _on_chart(rotor_sph, chart),
        rest_rotor=None if rest_sph is None else _on_chart(rest_sph, chart),
        potential=None if potential_sph is None else _covector_on_chart(potential_sph, chart),
        spherical_matrix=matrix_sph,
        **extra,
    )


def _energy(cfg: SolutionConfig, default: float) -> float:
    return default if cfg.epsilon is None else cfg.epsilon


def build_general_ansatz(cfg: SolutionConfig) -> Solution:
    """f, g, rho given as expressions; the defaults give the free rest spinor."""
    consts = cfg.consts
    f = compile_expression(cfg.f or "0", consts)
    g = compile_expression(cfg.g or "0", consts)
    rho = compile_expression(cfg.rho or "1", consts)
    eps = _energy(cfg, consts.m * consts.c**2)

    def parts(x):
        t, r, th, ph = x[0], x[1], x[2], x[3]
        return jnp.sqrt(rho(t, r, th, ph)), jnp.arctan(g(t, r, th, ph)), jnp.arctanh(f(t, r, th, ph)), ph

    def matrix(x):
        sr, beta, w, ph = parts(x)
        return general_matrix(sr, beta, w, ph, x[0], eps, consts)

    def rotor(x):
        _, beta, w, ph = parts(x)
        return general_rotor(beta, w, ph)

    def rest(x):
        _, beta, w, ph = parts(x)
        return general_rest_rotor(beta, w, ph)

    sol = _make_solution(cfg, "general_ansatz", matrix, rotor, rest)
    return sol


def build_planar(cfg: SolutionConfig) -> Solution:
    """g = 0: a pure azimuthal boost with rapidity artanh f(s), s the cylindrical radius."""
    consts = cfg.consts
    f = compile_expression(cfg.f or "0.5*tanh(s)", consts)
    rho = compile_expression(cfg.rho or "exp(-s**2/3)", consts)
    eps = _energy(cfg, consts.m * consts.c**2)

    def matrix(x):
        t, r, th, ph = x[0], x[1], x[2], x[3]
        boost = azimuthal_boost(jnp.arctanh(f(t, r, th, ph)), ph)
        return jnp.sqrt(rho(t, r, th, ph)) * boost @ energy_phase(t, eps, consts)

    def rotor(x):
        return azimuthal_boost(jnp.arctanh(f(x[0], x[1], x[2], x[3])), x[3])

    return _make_solution(cfg, "planar_2d", matrix, rotor, rotor)


def hydrogen_constants(cfg: SolutionConfig) -> tuple[float, float]:
    """(X0, epsilon) of the constant-X ground state."""
    za = cfg.Z * cfg.alpha
    root = math.sqrt(1.0 - za * za)
    consts = cfg.consts
    return root / za, _energy(cfg, consts.m * consts.c**2 * root)


def coulomb_potential(cfg: SolutionConfig) -> Callable:
    return lambda r: cfg.Z * cfg.alpha * cfg.consts.hbar / r


def build_hydrogen(cfg: SolutionConfig) -> Solution:
    consts = cfg.consts
    X0, eps = hydrogen_constants(cfg)
    za = cfg.Z * cfg.alpha
    kappa = cfg.kappa
    profiles = None
    r_range = (0.0, math.inf)
    if cfg.profile == "constant":
        potential_r = coulomb_potential(cfg)
        root = math.sqrt(1.0 - za * za)
        k = consts.m * consts.c / consts.hbar

        def X_of(r):
            return X0 + 0.0 * r

        def G_of(r):
            return 2.0 * k * za * r - 2.0 * root * jnp.log(r)

    else:
        if cfg.potential is None:
            potential_r = coulomb_potential(cfg)
        else:
            potential_r, _ = compile_radial(cfg.potential, consts, {"Z": cfg.Z, "alpha": cfg.alpha})
        x_start = X0 if cfg.X0 is None else cfg.X0
        profiles = hydrogen_profiles(potential_r, eps, consts, cfg.r0, x_start, cfg.G0, cfg.r_span)
        X_of, G_of = profiles.X_traced, profiles.G_traced
        r_range = profiles.r_span

    def parts(x):
        r, th, ph = x[1], x[2], x[3]
        X = X_of(r)
        ct = jnp.cos(th)
        f = jnp.sin(th) / jnp.sqrt(1.0 + X * X)
        beta = jnp.arctan(ct / X)
        sqrt_rho = kappa * jnp.exp(-0.5 * G_of(r)) * (X * X + ct * ct) ** 0.25 / r
        return sqrt_rho, beta, jnp.arctanh(f), ph

    def matrix(x):
        sr, beta, w, ph = parts(x)
        return general_matrix(sr, beta, w, ph, x[0], eps, consts)

    def rotor(x):
        _, beta, w, ph = parts(x)
        return general_rotor(beta, w, ph)

    def rest(x):
        _, beta, w, ph = parts(x)
        return general_rest_rotor(beta, w, ph)

    def potential(x):
        a_t = -potential_r(x[1]) / consts.q
        return jnp.array([a_t, 0.0 * a_t, 0.0 * a_t, 0.0 * a_t])

    return _make_solution(cfg, "hydrogen", matrix, rotor, rest, potential, profiles=profiles, r_range=r_range)


def zero_beta_rotor(w, th, ph):
    u = rotation_exp(-0.5 * ph, PHASE_GEN) @ rotation_exp(0.5 * th, _G31) @ rotation_exp(0.25 * math.pi, _G31)
    return azimuthal_boost(w, ph) @ u


def _zero_beta(cfg: SolutionConfig, family: str, a: float, G_fn, dG_fn, eps: float, sqrt_rho_fn, loop_field=None):
    consts = cfg.consts
    w = math.atanh(-math.sqrt(1.0 - a * a))
    root = math.sqrt(1.0 - a * a)
    hbar, c, m, q = consts.hbar, consts.c, consts.m, consts.q

    def rotor(x):
        return zero_beta_rotor(w, x[2], x[3])

    def matrix(x):
        return sqrt_rho_fn(x[1], x[2]) * rotor(x) @ energy_phase(x[0], eps, consts)

    def potential(x):
        r, th = x[1], x[2]
        dG = dG_fn(r)
        a_t = hbar * root * dG / (2.0 * a) - c * m / a + eps / c
        a_phi = r * jnp.sin(th) * (-2.0 * root * c * m + hbar * dG) / (2.0 * a)
        return jnp.array([a_t, 0.0 * r, 0.0 * r, a_phi]) / q

    return _make_solution(cfg, family, matrix, rotor, rotor, potential, loop_field=loop_field)


def build_zero_beta(cfg: SolutionConfig) -> Solution:
    """Generic radial function G (default a smooth confining choice)."""
    consts = cfg.consts
    a = cfg.a
    G_fn, dG_fn = compile_radial(cfg.G or "0.3*r + 0.1*r**2 - 0.2*log(r)", consts)
    kappa = cfg.kappa
    pref = kappa * (1.0 - a * a) ** 0.25 / math.sqrt(2.0 * a)

    def sqrt_rho(r, th):
        return pref * jnp.exp(-0.5 * G_fn(r)) / (r * jnp.sqrt(jnp.sin(th)))

    eps = _energy(cfg, consts.m * consts.c**2)
    return _zero_beta(cfg, "zero_beta", a, G_fn, dG_fn, eps, sqrt_rho)


def build_uniform_b(cfg: SolutionConfig) -> Solution:
    """a = 1 limit: no boost, replaced density, G = i mu0 r / (2 R hbar), eps = mc^2."""
    consts = cfg.consts
    slope = cfg.loop_field / consts.hbar
    kappa = cfg.kappa

    def G_fn(r):
        return slope * r

    def dG_fn(r):
        return slope + 0.0 * r

    def sqrt_rho(r, th):
        return kappa * jnp.exp(-0.5 * G_fn(r)) / (r * jnp.sqrt(2.0 * jnp.sin(th)))

    eps = _energy(cfg, consts.m * consts.c**2)
    return _zero_beta(cfg, "zero_beta_uniform_b", 1.0, G_fn, dG_fn, eps, sqrt_rho, loop_field=cfg.loop_field)


def build_coulomb_solenoid(cfg: SolutionConfig) -> Solution:
    """Coulomb potential plus the loop field; eps is fixed so that A_t = -alpha hbar / r."""
    consts = cfg.consts
    hbar, c, m = consts.hbar, consts.c, consts.m
    a = cfg.a
    root = math.sqrt(1.0 - a * a)
    strength = cfg.alpha if cfg.coulomb_strength is None else cfg.coulomb_strength
    loop = cfg.loop_field
    k = m * c / hbar

    def G_fn(r):
        return -(2.0 * a * strength / root) * jnp.log(k * r) + 2.0 * root * k * r + a * loop * r / hbar

    def dG_fn(r):
        return -(2.0 * a * strength / root) / r + 2.0 * root * k + a * loop / hbar

    kappa = cfg.kappa
    pref = kappa * (1.0 - a * a) ** 0.25 / math.sqrt(2.0 * a)

    def sqrt_rho(r, th):
        return pref * jnp.exp(-0.5 * G_fn(r)) / (r * jnp.sqrt(jnp.sin(th)))

    eps = _energy(cfg, a * m * c * c - c * root * loop / 2.0)
    return _zero_beta(cfg, "zero_beta_coulomb_solenoid", a, G_fn, dG_fn, eps, sqrt_rho, loop_field=loop)


@dataclass(frozen=True, eq=False)
class RestFrame:
    """The rest-frame view of a solution: transformed spinor on the rotated tetrad."""

    solution: Solution
    inner: Solution
    rotor: Callable

    @property
    def tetrad(self) -> TetradField:
        return self.solution.geometry.tetrad

    def tetrad_at(self, p: ChartPoint) -> Tetrad:
        return self.tetrad.at(p)

    def spin_connection_at(self, p: ChartPoint, mode: str = "analytic") -> SpinConnection:
        return spin_connection(self.tetrad, p, mode)


def rest_frame(sol: Solution) -> RestFrame:
    """Move a solution to the frame where its velocity is (1, 0, 0, 0) and its spin lies along the third axis."""
    if sol.rest_rotor is None:
        raise DomainError(f"family {sol.family} has no rest rotor")
    rotor = sol.rest_rotor
    base = sol.geometry
    geo = Geometry(base.chart, rotated_tetrad(rotor, base.tetrad, name="rest"))
    inner_matrix = sol.field.matrix

    def matrix(x):
        return tilde(rotor(x)) @ inner_matrix(x)

    field = SpinorField(matrix, geo, f"rest_frame_of({sol.family})")
    identity = lambda x: jnp.eye(4, dtype=jnp.complex128) + 0.0 * x[0]  # noqa: E731
    rest_sol = Solution(
        family="rest_frame_of",
        config=sol.config,
        field=field,
        consts=sol.consts,
        rotor=None,
        rest_rotor=identity,
        potential=sol.potential,
        spherical_matrix=sol.spherical_matrix,
        profiles=sol.profiles,
        loop_field=sol.loop_field,
        r_range=sol.r_range,
    )
    return RestFrame(solution=rest_sol, inner=sol, rotor=rotor)


_BUILDERS = {
    "general_ansatz": build_general_ansatz,
    "planar_2d": build_planar,
    "hydrogen": build_hydrogen,
    "zero_beta": build_zero_beta,
    "zero_beta_uniform_b": build_uniform_b,
    "zero_beta_coulomb_solenoid": build_coulomb_solenoid,
}


def build_solution(cfg: SolutionConfig) -> Solution:
    """Build (or reuse) the solution for a config; solutions are immutable, so equal configs share one."""
    return _build_cached(cfg.model_dump_json())


@lru_cache(maxsize=32)
def _build_cached(text: str) -> Solution:
    cfg = SolutionConfig.model_validate_json(text)
    if cfg.family == "rest_frame_of":
        return rest_frame(inner_solution(cfg)).solution
    return _BUILDERS[cfg.family](cfg)


def inner_solution(cfg: SolutionConfig) -> Solution:
    """The lab-frame solution behind a config (the inner one for rest frames)."""
    if cfg.family == "rest_frame_of":
        return build_solution(cfg.inner.model_copy(update={"chart": cfg.chart}))
    return build_solution(cfg)


# ---------------------------------------------------------------- field strengths


def physical_frame(chart: Chart, x):
    """Orthonormal spatial coframe e^a_mu (a = 1..3 by rows) of the chart's coordinate directions."""
    if chart.kind == "cartesian":
        return jnp.eye(4)[1:] + 0.0 * x[0]
    r, th = x[1], x[2]
    z = 0.0 * r
    return jnp.array(
        [
            [z, 1.0 + z, z, z],
            [z, z, r, z],
            [z, z, z, r * jnp.sin(th)],
        ]
    )


@dataclass(frozen=True)
class FieldValues:
    """Electric field, magnetic field and current in orthonormal chart components."""

    E: np.ndarray
    B: np.ndarray
    J: np.ndarray


def _frame_inverse(chart, x):
    """Dual vectors e^mu_a for the spatial orthonormal frame (columns a = 1..3)."""
    co = physical_frame(chart, x)[:, 1:]
    return jnp.linalg.inv(co)


def _two_form_to_vector(f_spatial, chart, x):
    """Hodge dual (1/2) eps_kij F_ij of a coordinate two-form in the orthonormal frame."""
    inv = _frame_inverse(chart, x)
    f_frame = inv.T @ f_spatial @ inv
    return jnp.array([f_frame[1, 2], f_frame[2, 0], f_frame[0, 1]])


def field_strength_functions(potential: Callable, chart: Chart, mode: str = "analytic", step: float = DEFAULT_STEP):
    """Traceable functions for E, B and J from a covariant potential A_mu(x).

    B = curl of the physical vector potential, whose orthonormal components are
    minus the spatial covariant frame components of A; E = c F_{0i} (static
    part included); J = curl B with unit permeability. Nested finite
    differences use a step ten times larger at each nesting level.
    """
    check_mode(mode)

    def dA(x):
        return jacobian(potential, x, mode, step)  # [nu, mu] = d_mu A_nu

    def magnetic(x):
        d = dA(x)
        f = d.T - d  # f[mu, nu] = d_mu A_nu - d_nu A_mu
        return -_two_form_to_vector(f[1:, 1:], chart, x)

    def electric(x):
        d = dA(x)
        f = d.T - d
        inv = _frame_inverse(chart, x)
        return f[0, 1:] @ inv

    def current(x):
        def b_covector(y):
            co = physical_frame(chart, y)
            return magnetic(y) @ co  # coordinate components B_mu of the one-form

        d = jacobian(b_covector, x, mode, 10.0 * step)
        f = d.T - d
        return _two_form_to_vector(f[1:, 1:], chart, x)

    return electric, magnetic, current


def fields_from_potential(
    potential: Callable,
    chart: Chart,
    p: ChartPoint,
    consts: Constants = Constants(),
    mode: str = "analytic",
    step: float = DEFAULT_STEP,
) -> FieldValues:
    x = jnp.asarray(p.coords)
    electric, magnetic, current = field_strength_functions(potential, chart, mode, step)
    return FieldValues(
        E=consts.c * np.asarray(electric(x)),
        B=np.asarray(magnetic(x)),
        J=np.asarray(current(x)),
    )


def axial_component(B, x) -> float:
    """z component of a spherical orthonormal vector."""
    th = x[2]
    return B[0] * np.cos(th) - B[1] * np.sin(th)


def spin_tip(X, theta):
    """Signed transverse spin of the constant-X family, (sqrt(X^2+1) - X) sin cos / sqrt(cos^2 + X^2)."""
    X = np.asarray(X, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return (np.sqrt(X * X + 1.0) - X) * s * c / np.sqrt(c * c + X * X)


def spin_tip_bound(X):
    """Value of :func:`spin_tip` at theta = pi/4."""
    X = np.asarray(X, dtype=float)
    return (np.sqrt(X * X + 1.0) - X) / np.sqrt(2.0 + 4.0 * X * X)


def transverse_spin(s, phi) -> float:
    """Projection of the spin on the horizontal radial direction, s^1 cos phi + s^2 sin phi."""
    return float(s[1] * np.cos(phi) + s[2] * np.sin(phi))


__all__ = [
    "FAMILIES",
    "ConstantsConfig",
    "SolutionConfig",
    "Solution",
    "RadialProfiles",
    "RestFrame",
    "FieldValues",
    "compile_expression",
    "compile_radial",
    "general_matrix",
    "general_rotor",
    "general_rest_rotor",
    "theta_angle",
    "clamped_arccos",
    "theta_angle_argument",
    "tilt_angle",
    "build_general",
    "build_solution",
    "inner_solution",
    "build_general_ansatz",
    "build_planar",
    "build_hydrogen",
    "build_zero_beta",
    "build_uniform_b",
    "build_coulomb_solenoid",
    "hydrogen_constants",
    "hydrogen_profiles",
    "riccati_to_x",
    "x_to_riccati",
    "rest_frame",
    "field_strength_functions",
    "fields_from_potential",
    "physical_frame",
    "axial_component",
    "spin_tip",
    "spin_tip_bound",
    "transverse_spin",
]
