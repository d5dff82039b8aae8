"""Independent checks of built solutions: Dirac residuals, constraint sweeps, grid reports and normalization."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Literal, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, ConfigDict, Field

from ._backend import jax, jnp
from .clifford import ETA, GAMMA, GAMMA_UP, NON_VECTOR_SLOTS, PHASE_GEN, VECTOR_SLOTS, tilde
from .diff import check_mode, jacobian
from .errors import ConfigError, IntegrationError, NotNormalizable, PathDisagreement, SingularSpinor
from .geometry import ChartPoint, curved_gammas, omega_matrices
from .inversion import (
    PATH_TOLERANCE,
    Constants,
    PotentialField,
    SpinorField,
    _covariant_kernel,
    compiled_constraints,
)
from .solutions import Solution, axial_component, field_strength_functions
from .spinor import SINGULAR_THRESHOLD, bilinear_parts, singularity_measure

REPORT_VERSION = 1
CHUNK = 128

DEFAULT_TOLERANCES = {
    "analytic": {"dirac": 1e-10, "constraint": 1e-10, "norm": 1e-10, "purity": 1e-8, "imaginary": 1e-10, "closed_form": 1e-8},
    "fd": {"dirac": 1e-6, "constraint": 1e-6, "norm": 1e-10, "purity": 1e-6, "imaginary": 1e-10, "closed_form": 1e-6},
}


# ---------------------------------------------------------------- Dirac residual


def dirac_residual_terms(field: SpinorField, consts: Constants, x, a_mu, mode: str = "analytic"):
    """(column-form residual, matrix-form residual), both relative to mc times the spinor norm (traceable)."""
    geo = field.geometry
    psi = field.matrix(x)
    dpsi = jnp.moveaxis(jacobian(field.matrix, x, mode), -1, 0)
    cov = dpsi + omega_matrices(geo.omega(x, mode)) @ psi
    _, g_up = curved_gammas(geo.tetrad.e_up(x), geo.tetrad.e_down(x))
    aslash = jnp.einsum("m,mij->ij", a_mu, g_up)
    kinetic = jnp.einsum("mij,mjk->ik", g_up, cov)
    mat = consts.hbar * kinetic @ PHASE_GEN - consts.q * aslash @ psi - consts.mc * psi @ GAMMA[0]
    col = 1j * consts.hbar * kinetic[:, 0] - consts.q * aslash @ psi[:, 0] - consts.mc * psi[:, 0]
    r_col = jnp.linalg.norm(col) / (consts.mc * jnp.linalg.norm(psi[:, 0]))
    r_mat = jnp.linalg.norm(mat) / (consts.mc * jnp.linalg.norm(psi))
    return r_col, r_mat


def dirac_residual(
    field: SpinorField,
    potential,
    consts: Constants,
    p: ChartPoint,
    mode: str = "analytic",
) -> float:
    """Relative residual of the Dirac equation for a given potential at one point.

    ``potential`` is a PotentialField or the covariant components A_mu. The
    larger of the column-form and the four-column matrix-form residuals is
    returned.
    """
    check_mode(mode)
    a_mu = potential.A if isinstance(potential, PotentialField) else np.asarray(potential, dtype=float)
    x = jnp.asarray(p.coords)
    psi = np.asarray(field.matrix(x))
    if not np.linalg.norm(psi[:, 0]) > 0:
        raise ValueError("spinor vanishes at this point")
    r_col, r_mat = dirac_residual_terms(field, consts, x, jnp.asarray(a_mu), mode)
    return float(max(r_col, r_mat))


# ---------------------------------------------------------------- grids


class GridSpec(BaseModel):
    """Sample points: ``random`` draws ``count`` uniform points, ``regular`` a tensor grid of ``counts``."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["random", "regular"] = "random"
    ranges: Optional[list[tuple[float, float]]] = None
    count: int = Field(200, ge=0)
    counts: Optional[list[int]] = None
    seed: int = Field(0, ge=0, lt=2**64)


def default_ranges(chart_kind: str) -> list[tuple[float, float]]:
    if chart_kind == "cartesian":
        return [(0.0, 1.0), (-5.0, 5.0), (-5.0, 5.0), (-5.0, 5.0)]
    return [(0.0, 1.0), (0.1, 20.0), (1e-3, math.pi - 1e-3), (-math.pi, math.pi)]


def grid_points(spec: GridSpec, chart_kind: str) -> np.ndarray:
    ranges = spec.ranges or default_ranges(chart_kind)
    if len(ranges) != 4:
        raise ConfigError("grid ranges need four [lo, hi] pairs")
    lo = np.array([r[0] for r in ranges], dtype=float)
    hi = np.array([r[1] for r in ranges], dtype=float)
    if np.any(hi < lo):
        raise ConfigError("grid ranges need lo <= hi")
    if spec.kind == "random":
        if spec.count == 0:
            raise ConfigError("empty grid")
        rng = np.random.default_rng(spec.seed)
        return lo + (hi - lo) * rng.random((spec.count, 4))
    counts = spec.counts or [1, 10, 10, 10]
    if len(counts) != 4 or min(counts) <= 0:
        raise ConfigError("empty grid" if counts and min(counts) == 0 else "regular grids need four positive counts")
    axes = [np.linspace(l, h, n) if n > 1 else np.array([0.5 * (l + h)]) for l, h, n in zip(lo, hi, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _chunked(fn, points: np.ndarray, chunk: int = CHUNK) -> dict:
    """Apply a vmapped function in fixed-size chunks (padding the tail) and concatenate."""
    n = len(points)
    outs = []
    for start in range(0, n, chunk):
        block = points[start : start + chunk]
        pad = chunk - len(block)
        if pad:
            block = np.concatenate([block, np.repeat(block[-1:], pad, axis=0)])
        res = fn(jnp.asarray(block))
        outs.append({k: np.asarray(v)[: chunk - pad] for k, v in res.items()})
    return {k: np.concatenate([o[k] for o in outs]) for k in outs[0]}


@lru_cache(maxsize=64)
def _batched_checks(field: SpinorField, consts: Constants, mode: str):
    kernel = _covariant_kernel(field, consts, mode)

    def one(x, scale):
        inv = kernel(x)
        a = jnp.real(inv["A_matrix"])
        r_col, r_mat = dirac_residual_terms(field, consts, x, a * scale, mode)
        rho, beta, v, s, _, _ = bilinear_parts(field.matrix(x))
        norm_dev = jnp.max(
            jnp.abs(jnp.array([v @ ETA @ v - 1.0, s @ ETA @ s + 1.0, v @ ETA @ s]))
        )
        return {
            "A": a,
            "A_imag": jnp.imag(inv["A_matrix"]),
            "A_component": inv["A_component"],
            "basis": inv["basis"],
            "dirac": jnp.maximum(r_col, r_mat),
            "norm": norm_dev,
            "singular": singularity_measure(field.matrix(x)),
        }

    return jax.jit(jax.vmap(one, in_axes=(0, None)))


def invert_grid(sol: Solution, points: np.ndarray, mode: str = "fd", path_tol: Optional[float] = None) -> dict:
    """Covariant potential at many points with the singularity and cross-path checks applied.

    Returns arrays ``A`` (real, n x 4), ``purity`` and ``imaginary``.
    """
    check_mode(mode)
    path_tol = PATH_TOLERANCE[mode] if path_tol is None else path_tol
    points = np.asarray(points, dtype=float)
    for x in points:
        sol.point(x)
    fn = _batched_checks(sol.field, sol.consts, mode)
    out = _chunked(lambda xs: fn(xs, jnp.ones(4)), points)
    _raise_on_singular(out["singular"], points)
    a = out["A"]
    path = np.max(np.abs(a - out["A_component"]), axis=1)
    a_scale = np.maximum(sol.consts.potential_scale, np.max(np.abs(a), axis=1))
    _raise_on_disagreement(path, a_scale, path_tol, points)
    basis = out["basis"]
    qscale = abs(sol.consts.q)
    purity = np.max(np.abs(basis[:, list(NON_VECTOR_SLOTS)]), axis=1) / qscale
    vec_imag = np.max(np.abs(basis[:, list(VECTOR_SLOTS)].imag), axis=1) / qscale
    return {
        "A": a,
        "path": path,
        "path_scale": a_scale,
        "purity": np.maximum(purity, vec_imag),
        "imaginary": np.max(np.abs(out["A_imag"]), axis=1),
        "dirac": out["dirac"],
        "norm": out["norm"],
    }


def _raise_on_singular(measure, points):
    bad = np.flatnonzero(~(measure > SINGULAR_THRESHOLD))
    if bad.size:
        raise SingularSpinor(f"matrix spinor is singular at {points[bad[0]].tolist()}")


def _raise_on_disagreement(path, a_scale, path_tol, points):
    if np.any(path > path_tol * a_scale):
        i = int(np.argmax(path / a_scale))
        raise PathDisagreement(f"inversion routes differ by {path[i]:.3e} at {points[i].tolist()}")


@dataclass
class Metric:
    max: float
    mean: float
    argmax: list

    @classmethod
    def of(cls, values: np.ndarray, points: np.ndarray) -> "Metric":
        values = np.asarray(values, dtype=float)
        i = int(np.argmax(values))
        return cls(max=float(values[i]), mean=float(values.mean()), argmax=[float(c) for c in points[i]])


@dataclass
class ResidualReport:
    """Aggregated verification results over a grid; every maximum carries the point where it occurs."""

    family: str
    chart: str
    mode: str
    grid: dict
    n_points: int
    metrics: dict
    tolerances: dict
    checks: dict
    diagnostics: dict = field(default_factory=dict)
    perturbation: dict = field(default_factory=dict)
    schema_version: int = REPORT_VERSION

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _perturbation_scale(perturbation: dict) -> np.ndarray:
    labels = ["A_t", "A_1", "A_2", "A_3"]
    scale = np.ones(4)
    for key, rel in (perturbation or {}).items():
        if key not in labels:
            raise ConfigError(f"unknown perturbation component {key!r}; use {labels}")
        scale[labels.index(key)] += float(rel)
    return scale


def grid_report(
    sol: Solution,
    grid: GridSpec,
    mode: str = "fd",
    tolerances: Optional[dict] = None,
    perturbation: Optional[dict] = None,
    field_checks: bool = True,
) -> ResidualReport:
    """Run every check over a grid and aggregate.

    Raises SingularSpinor at the first singular point and PathDisagreement when
    the two inversion routes disagree anywhere beyond tolerance.
    """
    check_mode(mode)
    tol = dict(DEFAULT_TOLERANCES[mode])
    unknown = set(tolerances or {}) - set(tol) - {"path"}
    if unknown:
        raise ConfigError(f"unknown tolerance keys {sorted(unknown)}")
    tol.update(tolerances or {})
    path_tol = tol.get("path", PATH_TOLERANCE[mode])
    tol["path"] = path_tol
    points = grid_points(grid, sol.chart.kind)
    for x in points:
        sol.point(x)
    consts = sol.consts
    scale = jnp.asarray(_perturbation_scale(perturbation or {}))

    fn = _batched_checks(sol.field, consts, mode)
    out = _chunked(lambda xs: fn(xs, scale), points)
    _raise_on_singular(out["singular"], points)

    a = out["A"]
    qscale = abs(consts.q)
    path = np.max(np.abs(a - out["A_component"]), axis=1)
    a_scale = np.maximum(consts.potential_scale, np.max(np.abs(a), axis=1))
    _raise_on_disagreement(path, a_scale, path_tol, points)
    basis = out["basis"]
    purity = np.max(np.abs(basis[:, list(NON_VECTOR_SLOTS)]), axis=1) / qscale
    vec_imag = np.max(np.abs(basis[:, list(VECTOR_SLOTS)].imag), axis=1) / qscale

    cons = _chunked(compiled_constraints(sol.field, consts, mode, batched=True), points)
    c1 = np.abs(cons["c1"] / cons["norm"])
    c2 = np.abs(cons["c2"] / cons["norm"])

    metrics = {
        "dirac": Metric.of(out["dirac"], points),
        "c1": Metric.of(c1, points),
        "c2": Metric.of(c2, points),
        "c1_raw": Metric.of(np.abs(cons["c1"]), points),
        "c2_raw": Metric.of(np.abs(cons["c2"]), points),
        "norm": Metric.of(out["norm"], points),
        "path": Metric.of(path, points),
        "purity": Metric.of(np.maximum(purity, vec_imag), points),
        "imaginary": Metric.of(np.max(np.abs(out["A_imag"]), axis=1), points),
    }
    checks = {
        "dirac": metrics["dirac"].max < tol["dirac"],
        "c1": metrics["c1"].max < tol["constraint"],
        "c2": metrics["c2"].max < tol["constraint"],
        "norm": metrics["norm"].max < tol["norm"],
        "path": bool(np.all(path <= path_tol * a_scale)),
        "purity": metrics["purity"].max < tol["purity"],
        "imaginary": metrics["imaginary"].max < tol["imaginary"],
    }
    if sol.potential is not None:
        closed = np.asarray(jax.jit(jax.vmap(sol.potential))(jnp.asarray(points)))
        dev = np.max(np.abs(a - closed), axis=1)
        metrics["closed_form"] = Metric.of(dev, points)
        checks["closed_form"] = metrics["closed_form"].max < tol["closed_form"]

    diagnostics = {}
    if field_checks and sol.loop_field is not None and sol.chart.kind == "spherical":
        diagnostics = field_diagnostics(sol, points, mode)

    return ResidualReport(
        family=sol.family,
        chart=sol.chart.kind,
        mode=mode,
        grid=grid.model_dump(mode="json"),
        n_points=int(len(points)),
        metrics={k: asdict(v) for k, v in metrics.items()},
        tolerances=tol,
        checks=checks,
        diagnostics=diagnostics,
        perturbation=dict(perturbation or {}),
    )


# ---------------------------------------------------------------- field diagnostics


def printed_loop_fields(sol: Solution, x) -> dict:
    """Closed forms quoted for the loop presets: B_r, B_theta and J_phi (orthonormal components)."""
    cfg = sol.config
    hbar = sol.consts.hbar
    r, th = x[1], x[2]
    loop = sol.loop_field
    if sol.family == "zero_beta_uniform_b":
        strength, root = 0.0, 1.0
    else:
        strength = cfg.alpha if cfg.coulomb_strength is None else cfg.coulomb_strength
        root = math.sqrt(1.0 - cfg.a**2)
    b_r = loop * np.cos(th) - 2.0 * strength * hbar * np.cos(th) / (root * r)
    b_th = strength * hbar * np.sin(th) / (root * r) - loop * np.sin(th)
    j_phi = -2.0 * strength * hbar * np.sin(th) / (root * r * r)
    return {"B_r": b_r, "B_theta": b_th, "J_phi": j_phi}


def derived_loop_fields(sol: Solution, x) -> dict:
    """Curl and double curl of the loop-preset potential worked out by hand: B_r, B_theta and J_phi."""
    cfg = sol.config
    r, th = x[1], x[2]
    half = sol.loop_field / 2.0
    if sol.family == "zero_beta_uniform_b":
        coulomb = 0.0
    else:
        strength = cfg.alpha if cfg.coulomb_strength is None else cfg.coulomb_strength
        coulomb = strength * sol.consts.hbar / math.sqrt(1.0 - cfg.a**2)
    b_r = np.cos(th) / np.sin(th) * (coulomb / r - half) / r
    b_th = half / r + 0.0 * th
    j_phi = (coulomb / r - half) / (r * r * np.sin(th) ** 2)
    return {"B_r": b_r, "B_theta": b_th, "J_phi": j_phi}


@lru_cache(maxsize=32)
def _batched_fields(sol: Solution, mode: str):
    electric, magnetic, current = field_strength_functions(sol.inverted_potential("analytic"), sol.chart, mode)

    def one(x):
        return {"E": electric(x), "B": magnetic(x), "J": current(x)}

    return jax.jit(jax.vmap(one))


def field_values(sol: Solution, points: np.ndarray, mode: str = "fd") -> dict:
    """E (times c), B and J at many points, orthonormal chart components."""
    out = _chunked(_batched_fields(sol, mode), np.asarray(points, dtype=float))
    out["E"] = out["E"] * sol.consts.c
    return out


def field_diagnostics(sol: Solution, points: np.ndarray, mode: str = "fd") -> dict:
    """Axial field spread plus deviations from the quoted and the hand-derived loop fields (reported, not gating)."""
    vals = field_values(sol, points, mode)
    b, j = vals["B"], vals["J"]
    bz = np.array([axial_component(bb, x) for bb, x in zip(b, points)])
    printed = printed_loop_fields(sol, points.T)
    res = {
        "axial_B_spread": Metric.of(np.abs(bz - bz.mean()), points),
        "axial_B_deviation": Metric.of(np.abs(bz - sol.loop_field), points),
        "B_r_deviation": Metric.of(np.abs(b[:, 0] - printed["B_r"]), points),
        "B_theta_deviation": Metric.of(np.abs(b[:, 1] - printed["B_theta"]), points),
        "J_phi_deviation": Metric.of(np.abs(j[:, 2] - printed["J_phi"]), points),
    }
    derived = derived_loop_fields(sol, points.T)
    res["B_r_derived_deviation"] = Metric.of(np.abs(b[:, 0] - derived["B_r"]), points)
    res["B_theta_derived_deviation"] = Metric.of(np.abs(b[:, 1] - derived["B_theta"]), points)
    res["J_phi_derived_relative"] = Metric.of(
        np.abs(j[:, 2] - derived["J_phi"]) / np.maximum(np.abs(derived["J_phi"]), 1.0), points
    )
    return {k: asdict(v) for k, v in res.items()}


# ---------------------------------------------------------------- normalization


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre in log r, Gauss-Legendre in theta, trapezoid in phi."""

    radial_panels: int = 40
    panel_nodes: int = 16
    theta_nodes: int = 48
    phi_nodes: int = 8
    r_inner: float = 1e-10
    r_cap: float = 1e7
    tail: float = 1e-18
    tol: float = 1e-8
    refinements: int = 3


def _density_fn(sol: Solution):
    matrix = sol.spherical_matrix

    def density(x):
        m = matrix(x)
        j0 = jnp.real(jnp.trace(m @ GAMMA[0] @ tilde(m) @ GAMMA_UP[0])) / 4.0
        return j0 * x[1] ** 2 * jnp.sin(x[2])

    return jax.jit(jax.vmap(density))


def _angular_nodes(spec: QuadratureSpec):
    xt, wt = leggauss(spec.theta_nodes)
    theta = 0.5 * math.pi * (xt + 1.0)
    wtheta = 0.5 * math.pi * wt
    phi = -math.pi + 2.0 * math.pi * np.arange(spec.phi_nodes) / spec.phi_nodes
    wphi = np.full(spec.phi_nodes, 2.0 * math.pi / spec.phi_nodes)
    return theta, wtheta, phi, wphi


def _radial_marginal(density, radii, spec):
    theta, wtheta, phi, wphi = _angular_nodes(spec)
    rr, tt, pp = np.meshgrid(radii, theta, phi, indexing="ij")
    pts = np.stack([np.zeros(rr.size), rr.ravel(), tt.ravel(), pp.ravel()], axis=-1)
    vals = _chunked(lambda xs: {"v": density(xs)}, pts, chunk=4096)["v"].reshape(rr.shape)
    return np.einsum("rtp,t,p->r", vals, wtheta, wphi)


def _integrate(density, r_lo, r_hi, panels, spec) -> float:
    edges = np.geomspace(r_lo, r_hi, panels + 1)
    xg, wg = leggauss(spec.panel_nodes)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    radii = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return float(np.sum(weights * _radial_marginal(density, radii, spec)))


def normalization_integral(sol: Solution, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """The integral of rho v^t over space at t = 0 for the solution's current kappa."""
    if sol.spherical_matrix is None:
        raise NotNormalizable(f"family {sol.family} has no spherical form to integrate")
    density = _density_fn(sol)
    probe = np.geomspace(spec.r_inner, spec.r_cap, 120)
    marg = _radial_marginal(density, probe, spec)
    if not np.all(np.isfinite(marg)):
        raise NotNormalizable("density is not finite on the radial probe")
    radial = marg * probe  # integrand per unit log r
    peak = float(np.max(radial))
    if not peak > 0:
        raise NotNormalizable("density vanishes identically")
    if radial[-1] > spec.tail * peak:
        raise NotNormalizable(f"density tail does not decay (r^3 rho at r = {spec.r_cap:g} is {radial[-1] / peak:.3e} of its peak)")
    if radial[0] > spec.tol * peak:
        raise NotNormalizable("density is not integrable at the origin to the requested tolerance")
    r_hi = float(probe[np.flatnonzero(radial > spec.tail * peak)[-1] + 1])
    r_lo = float(probe[max(np.flatnonzero(radial > spec.tol * 1e-4 * peak)[0] - 1, 0)])
    panels = spec.radial_panels
    value = _integrate(density, r_lo, r_hi, panels, spec)
    for _ in range(spec.refinements):
        finer = _integrate(density, r_lo, r_hi, 2 * panels, spec)
        if abs(finer - value) <= spec.tol * abs(finer):
            return finer
        value, panels = finer, 2 * panels
    raise IntegrationError(f"normalization quadrature did not converge to {spec.tol:g}")


def normalize(sol: Solution, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """kappa that makes the integral of rho v^t equal to one; idempotent."""
    integral = normalization_integral(sol, spec)
    return float(sol.config.kappa / math.sqrt(integral))


def hydrogen_norm_integral(Z: float, alpha: float, kappa: float = 1.0) -> float:
    """Closed-form integral of rho v^0 for the constant-X hydrogen family (natural units)."""
    za = Z * alpha
    gam = math.sqrt(1.0 - za * za)
    x0 = gam / za
    return 4.0 * math.pi * kappa**2 * math.sqrt(1.0 + x0 * x0) * math.gamma(2 * gam + 1) / (2 * za) ** (2 * gam + 1)


__all__ = [
    "DEFAULT_TOLERANCES",
    "REPORT_VERSION",
    "GridSpec",
    "Metric",
    "ResidualReport",
    "QuadratureSpec",
    "dirac_residual",
    "dirac_residual_terms",
    "grid_points",
    "default_ranges",
    "grid_report",
    "invert_grid",
    "field_values",
    "field_diagnostics",
    "printed_loop_fields",
    "derived_loop_fields",
    "normalization_integral",
    "normalize",
    "hydrogen_norm_integral",
]
