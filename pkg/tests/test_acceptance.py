"""One test per acceptance criterion; each prints a PASS/FAIL line with the measured values."""

import itertools
import math
import time

import numpy as np
import pytest

from crdi._backend import jnp
from crdi.cli import run
from crdi.clifford import ETA, GAMMA, GAMMA5, GAMMA_UP, IDENTITY, LEVI_CIVITA, SIGMA, SIGMA_UP, LorentzParams, anticommutator, commutator, lorentz_compact
from crdi.geometry import Chart, ChartPoint, default_tetrad, metricity_sweep, spin_connection, tetrad_from_rotor
from crdi.inversion import compiled_constraints, r_tensor
from crdi.solutions import SolutionConfig, axial_component, build_solution, hydrogen_constants, hydrogen_profiles, rest_frame
from crdi.spinor import bilinears
from crdi.verify import GridSpec, field_values, grid_points, grid_report, invert_grid, printed_loop_fields

from .conftest import FINE, hydrogen_x

SPH = Chart("spherical")
HYDROGEN_GRID = GridSpec(count=1000, seed=7, ranges=[(0, 1), (0.1, 20), (1e-3, math.pi - 1e-3), (-math.pi, math.pi)])


@pytest.fixture
def verdict(capsys):
    def emit(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")
        assert ok, detail

    return emit


def _spherical_sample(n, seed, r=(0.2, 5.0), theta=(0.2, math.pi - 0.2)):
    return grid_points(GridSpec(count=n, seed=seed, ranges=[(0, 1), r, theta, (-math.pi, math.pi)]), "spherical")


def test_criterion_01_algebraic_identities(verdict):
    start = time.perf_counter()
    worst = 0.0
    idx = range(4)
    for a, b in itertools.product(idx, idx):
        worst = max(worst, np.abs(anticommutator(GAMMA[a], GAMMA[b]) - 2 * ETA[a, b] * IDENTITY).max())
        worst = max(worst, np.abs(SIGMA[a, b] - commutator(GAMMA[a], GAMMA[b]) / 4).max())
    for a in idx:
        worst = max(worst, np.abs(anticommutator(GAMMA5, GAMMA[a])).max())
    worst = max(worst, np.abs(GAMMA5 @ GAMMA5 - IDENTITY).max())
    for a, b, c in itertools.product(idx, idx, idx):
        worst = max(worst, np.abs(commutator(GAMMA[a], SIGMA[b, c]) - (ETA[a, b] * GAMMA[c] - ETA[a, c] * GAMMA[b])).max())
        dual = 1j * np.einsum("q,qij->ij", LEVI_CIVITA[a, b, c], GAMMA5 @ GAMMA_UP)
        worst = max(worst, np.abs(anticommutator(GAMMA[a], SIGMA[b, c]) - dual).max())
    for a, b, c, d in itertools.product(idx, repeat=4):
        anti = 0.5 * (ETA[a, d] * ETA[b, c] - ETA[a, c] * ETA[b, d]) * IDENTITY + 0.5j * LEVI_CIVITA[a, b, c, d] * GAMMA5
        worst = max(worst, np.abs(anticommutator(SIGMA[a, b], SIGMA[c, d]) - anti).max())
        comm = ETA[a, d] * SIGMA[b, c] - ETA[a, c] * SIGMA[b, d] + ETA[b, c] * SIGMA[a, d] - ETA[b, d] * SIGMA[a, c]
        worst = max(worst, np.abs(commutator(SIGMA[a, b], SIGMA[c, d]) - comm).max())
    elapsed = time.perf_counter() - start
    verdict(1, worst < 1e-13 and elapsed < 1.0, f"max identity error {worst:.2e} (< 1e-13), {elapsed:.3f} s (< 1 s)")


def _series_exp(m, terms=60):
    out, term = np.eye(4, dtype=complex), np.eye(4, dtype=complex)
    for k in range(1, terms):
        term = term @ m / k
        out = out + term
    return out


def test_criterion_02_compact_lorentz_form(verdict):
    rng = np.random.default_rng(2)
    worst_exp = worst_props = 0.0
    for _ in range(100):
        pairs = rng.normal(size=6)
        pairs *= rng.uniform(0, 2) / np.linalg.norm(pairs)
        keys = ["t01", "t02", "t03", "t12", "t13", "t23"]
        p = LorentzParams.from_pairs(**dict(zip(keys, pairs)))
        lt = lorentz_compact(p)
        series = _series_exp(0.5 * np.einsum("ab,abij->ij", p.theta, SIGMA_UP))
        worst_exp = max(worst_exp, np.abs(lt.matrix - series).max())
        worst_props = max(worst_props, *map(abs, p.identity_residuals()))
    ok = worst_exp < 1e-10 and worst_props < 1e-10
    verdict(2, ok, f"compact vs series {worst_exp:.2e}, identity residuals {worst_props:.2e} (both < 1e-10)")


@pytest.fixture(scope="module")
def hydrogen_reports(hydrogen):
    return {mode: grid_report(hydrogen, HYDROGEN_GRID, mode) for mode in ("fd", "analytic")}


def test_criterion_03_hydrogen(verdict, hydrogen, hydrogen_reports):
    X0, eps = hydrogen_constants(hydrogen.config)
    pts = grid_points(HYDROGEN_GRID, "spherical")
    coulomb = {}
    for mode in ("fd", "analytic"):
        a = invert_grid(hydrogen, pts, mode)["A"]
        coulomb[mode] = float(np.max(np.abs(a[:, 0] + FINE / pts[:, 1])))
    fd = hydrogen_reports["fd"].metrics["dirac"]["max"]
    an = hydrogen_reports["analytic"].metrics["dirac"]["max"]
    ok = eps == pytest.approx(0.99997337, abs=1e-8) and max(coulomb.values()) < 1e-8 and fd < 1e-6 and an < 1e-10
    verdict(
        3,
        ok,
        f"eps {eps:.8f}; |A_t + Z alpha/r| fd {coulomb['fd']:.2e}, analytic {coulomb['analytic']:.2e} (< 1e-8); "
        f"Dirac fd {fd:.2e} (< 1e-6), analytic {an:.2e} (< 1e-10)",
    )


def test_criterion_04_radial_ode(verdict, hydrogen):
    X0, eps = hydrogen_constants(hydrogen.config)
    prof = hydrogen_profiles(lambda r: FINE / r, eps, hydrogen.consts, 1.0, X0, 0.0, (0.1, 50.0))
    r = np.geomspace(0.1, 50.0, 1000)
    drift = float(np.max(np.abs(prof.X(r) - X0)))
    routes = float(np.max(np.abs(prof.X(r) - prof.X_from_riccati(r)) / np.maximum(1.0, X0)))
    ok = drift < 1e-8 and routes < 1e-8 and prof.route_difference < 1e-8
    verdict(4, ok, f"|X - X0| {drift:.2e}, direct vs Riccati {routes:.2e} (internal {prof.route_difference:.2e}), all < 1e-8")


def test_criterion_05_zero_beta(verdict):
    a = 0.6
    cfg = SolutionConfig(family="zero_beta", a=a, G="0.3*r + 0.1*r**2 - 0.2*log(r)", epsilon=0.9)
    sol = build_solution(cfg)
    pts = _spherical_sample(200, 5)
    A = invert_grid(sol, pts, "analytic")["A"]
    r, th = pts[:, 1], pts[:, 2]
    g_prime = 0.3 + 0.2 * r - 0.2 / r
    root = math.sqrt(1 - a * a)
    a_t = root * g_prime / (2 * a) - 1 / a + 0.9
    a_phi = r * np.sin(th) * (-2 * root + g_prime) / (2 * a)
    pot_err = float(max(np.abs(A[:, 0] - a_t).max(), np.abs(A[:, 3] - a_phi).max(), np.abs(A[:, 1:3]).max()))
    r_err = beta_err = 0.0
    for x in pts[:20]:
        R = r_tensor(sol.rotor, sol.geometry, sol.point(x)).R
        expected = np.zeros((4, 4, 4))
        for (i, j, m), v in {(1, 3, 2): math.cos(x[3]), (2, 3, 2): math.sin(x[3]), (1, 2, 3): -1.0}.items():
            expected[i, j, m], expected[j, i, m] = v, -v
        r_err = max(r_err, float(np.abs(R - expected).max()))
    for x in pts:
        beta_err = max(beta_err, abs(bilinears(np.asarray(sol.field.matrix(jnp.asarray(x)))).beta))
    ok = pot_err < 1e-8 and r_err < 1e-10 and beta_err < 1e-12
    verdict(5, ok, f"A_t, A_phi closed forms {pot_err:.2e} (< 1e-8); R tensor {r_err:.2e} (< 1e-10); |beta| {beta_err:.2e} (< 1e-12)")


def test_criterion_06_uniform_field(verdict, uniform_b):
    grid = GridSpec(kind="regular", counts=[1, 10, 10, 10], ranges=[(0, 1), (0.5, 5), (0.1, math.pi - 0.1), (-3, 3)])
    pts = grid_points(grid, "spherical")
    B = field_values(uniform_b, pts, "fd")["B"]
    bz = np.array([axial_component(b, x) for b, x in zip(B, pts)])
    spread = float(np.ptp(bz))
    offset = float(np.max(np.abs(bz - uniform_b.loop_field)))
    dirac = grid_report(uniform_b, grid, "fd", field_checks=False).metrics["dirac"]["max"]
    ok = spread < 1e-8 and offset < 1e-8 and dirac < 1e-6
    verdict(
        6,
        ok,
        f"B_z spread {spread:.3e} (< 1e-8), max |B_z - i mu0/(2R)| {offset:.3e} (< 1e-8), Dirac {dirac:.2e} (< 1e-6)",
    )


def test_criterion_07_coulomb_solenoid_fields(verdict, coulomb_solenoid):
    pts = _spherical_sample(200, 6)
    vals = field_values(coulomb_solenoid, pts, "fd")
    quoted = printed_loop_fields(coulomb_solenoid, pts.T)
    dev = {
        "B_r": float(np.abs(vals["B"][:, 0] - quoted["B_r"]).max()),
        "B_theta": float(np.abs(vals["B"][:, 1] - quoted["B_theta"]).max()),
        "J_phi": float(np.abs(vals["J"][:, 2] - quoted["J_phi"]).max()),
    }
    verdict(7, max(dev.values()) < 1e-6, ", ".join(f"{k} deviation {v:.3e}" for k, v in dev.items()) + " (all < 1e-6)")


def test_criterion_08_geometry(verdict, hydrogen):
    tetrad = default_tetrad(SPH)
    pts = _spherical_sample(100, 8, r=(0.1, 20))
    conn = max(float(np.abs(spin_connection(tetrad, ChartPoint(SPH, x)).omega).max()) for x in pts[:20])
    metric = float(metricity_sweep(tetrad, SPH, pts, "fd").max())
    X = hydrogen_x()
    s = math.sqrt(X * X + 1)
    frame = rest_frame(hydrogen)
    closed = 0.0
    for x in pts[:10]:
        r, th = x[1], x[2]
        sn, cs = math.sin(th), math.cos(th)
        d = math.sqrt(cs * cs + X * X)
        d2 = d * d
        e_expected = np.zeros((4, 4))
        e_expected[0, 0], e_expected[0, 2] = s / d, sn / d
        e_expected[1, 1], e_expected[1, 3] = sn * X / d, cs * s / d
        e_expected[2, 1], e_expected[2, 3] = cs * s / (r * d), -sn * X / (r * d)
        e_expected[3, 0], e_expected[3, 2] = 1 / (r * d), s / (r * sn * d)
        e = tetrad_from_rotor(hydrogen.rest_rotor, tetrad, ChartPoint(SPH, x)).e_up
        closed = max(closed, float(np.abs(e - e_expected).max()))
        om = frame.spin_connection_at(ChartPoint(SPH, x)).omega
        expected = {
            (0, 2, 2): cs * s / d2,
            (1, 3, 2): X * s / d2 - 1,
            (0, 1, 3): -sn * (sn * sn * X + cs * cs * s) / d2,
            (0, 3, 3): sn * sn * cs * (X - s) / d2,
            (1, 2, 3): (sn * sn * X * s + cs * cs * (X * X + 1)) / d2,
            (2, 3, 3): sn * cs * (X * (s - X) - 1) / d2,
        }
        closed = max(closed, max(abs(om[k] - v) for k, v in expected.items()))
    vel = 0.0
    for x in pts:
        b = bilinears(np.asarray(frame.solution.field.matrix(jnp.asarray(x))))
        vel = max(vel, float(np.abs(b.v - [1, 0, 0, 0]).max()))
    ok = conn < 1e-12 and metric < 1e-8 and closed < 1e-8 and vel < 1e-10
    verdict(
        8,
        ok,
        f"spherical connection {conn:.2e} (< 1e-12), metricity {metric:.2e} (< 1e-8), "
        f"rest-frame closed forms {closed:.2e} (< 1e-8), velocity {vel:.2e} (< 1e-10)",
    )


FAMILIES = [
    ("hydrogen", "spherical"),
    ("hydrogen", "cartesian"),
    ("zero_beta", "spherical"),
    ("zero_beta_uniform_b", "spherical"),
    ("zero_beta_coulomb_solenoid", "spherical"),
    ("planar_2d", "cartesian"),
    ("general_ansatz", "spherical"),
]


def test_criterion_09_constraints(verdict, hydrogen):
    worst = {}
    for family, chart in FAMILIES:
        sol = build_solution(SolutionConfig(family=family, chart=chart))
        pts = _spherical_sample(200, 9) if chart == "spherical" else grid_points(GridSpec(count=200, seed=9), chart)
        out = compiled_constraints(sol.field, sol.consts, "fd", batched=True)(jnp.asarray(pts))
        c1 = np.abs(np.asarray(out["c1"]) / np.asarray(out["norm"])).max()
        c2 = np.abs(np.asarray(out["c2"]) / np.asarray(out["norm"])).max()
        worst[f"{family}/{chart}"] = float(max(c1, c2))
    generic = _spherical_sample(100, 10, r=(0.5, 3.0), theta=(0.2, 1.2))
    out = compiled_constraints(hydrogen.field, hydrogen.consts, "fd", batched=True)(jnp.asarray(generic))
    smallest_term = float(min(np.abs(np.asarray(out["spin_divergence"])).min(), np.abs(np.asarray(out["mass_term"])).min()))
    total = float(np.abs(np.asarray(out["c2"])).max())
    ok = max(worst.values()) < 1e-6 and smallest_term > 1e-2 and total < 1e-6
    verdict(
        9,
        ok,
        f"max relative c1, c2 over families {max(worst.values()):.2e} (< 1e-6); hydrogen terms >= {smallest_term:.2e} (> 1e-2), "
        f"their sum <= {total:.2e} (< 1e-6)",
    )


def test_criterion_10_falsifiability(verdict, hydrogen, tmp_path):
    report = grid_report(hydrogen, HYDROGEN_GRID, "fd", perturbation={"A_t": 0.01}, field_checks=False)
    residual = report.metrics["dirac"]["max"]
    cfg = tmp_path / "perturbed.json"
    cfg.write_text(
        '{"solution": {"family": "hydrogen"}, "perturbation": {"A_t": 0.01}, '
        '"grid": {"count": 1000, "seed": 7, "ranges": [[0, 1], [0.1, 20], [0.001, 3.140592653589793], [-3.141592653589793, 3.141592653589793]]}}'
    )
    code = run(["verify", "--config", str(cfg), "--out", str(tmp_path / "report.json")])
    ok = residual > 1e-3 and code != 0
    verdict(10, ok, f"perturbed Dirac residual {residual:.3e} (> 1e-3), verify exit code {code} (nonzero)")
