"""Batch command line: build a configured solution, invert, verify, and export tables and reports."""

from __future__ import annotations

import argparse
import io
import json
import sys
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ._backend import jnp
from .errors import ConfigError, ConstraintViolation, CRDIError, DomainError, PathDisagreement, SingularSpinor
from .inversion import PURITY_TOLERANCE, REALITY_TOLERANCE
from .solutions import SolutionConfig, build_solution, inner_solution, rest_frame
from .spinor import bilinear_parts
from .verify import GridSpec, QuadratureSpec, field_values, grid_points, grid_report, invert_grid, normalization_integral

EXIT_OK = 0
EXIT_CHECKS = 1
EXIT_CONFIG = 2
EXIT_SINGULAR = 3
EXIT_PATHS = 4

COMMANDS = ("invert", "verify", "fields", "frame", "normalize")


class QuadratureConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    radial_panels: int = Field(40, gt=0)
    panel_nodes: int = Field(16, gt=0)
    theta_nodes: int = Field(48, gt=0)
    phi_nodes: int = Field(8, gt=0)
    tol: float = Field(1e-8, gt=0)

    def build(self) -> QuadratureSpec:
        return QuadratureSpec(**self.model_dump())


class RunConfig(BaseModel):
    """Everything one command needs; unknown keys are rejected before any computation."""

    model_config = ConfigDict(extra="forbid")

    solution: SolutionConfig
    grid: GridSpec = GridSpec()
    derivatives: Literal["analytic", "fd"] = "fd"
    tolerances: dict[str, float] = Field(default_factory=dict)
    perturbation: dict[str, float] = Field(default_factory=dict)
    field_checks: bool = True
    quadrature: QuadratureConfig = QuadratureConfig()
    output: Optional[str] = None


def load_config(path: str) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}:\n{exc}") from exc


def apply_overrides(cfg: RunConfig, derivatives: Optional[str], seed: Optional[int], out: Optional[str]) -> RunConfig:
    update = {}
    if derivatives is not None:
        update["derivatives"] = derivatives
    if out is not None:
        update["output"] = out
    if seed is not None:
        update["grid"] = cfg.grid.model_copy(update={"seed": seed})
    return cfg.model_copy(update=update)


# ---------------------------------------------------------------- writers


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def csv_text(header: list[str], rows: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def json_text(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _coordinate_header(chart_kind: str) -> list[str]:
    if chart_kind == "cartesian":
        return ["t", "x", "y", "z"]
    return ["t", "r", "theta", "phi"]


# ---------------------------------------------------------------- commands


def cmd_invert(cfg: RunConfig) -> tuple[str, int]:
    sol = build_solution(cfg.solution)
    points = grid_points(cfg.grid, sol.chart.kind)
    res = invert_grid(sol, points, cfg.derivatives, cfg.tolerances.get("path"))
    purity_tol = cfg.tolerances.get("purity", PURITY_TOLERANCE[cfg.derivatives])
    if np.max(res["purity"]) > purity_tol or np.max(res["imaginary"]) > REALITY_TOLERANCE:
        raise ConstraintViolation(
            f"inverted potential is not a real vector (purity {np.max(res['purity']):.3e}, "
            f"imaginary part {np.max(res['imaginary']):.3e})"
        )
    header = _coordinate_header(sol.chart.kind) + ["A_t", "A_1", "A_2", "A_3"]
    return csv_text(header, np.hstack([points, res["A"]])), EXIT_OK


def cmd_verify(cfg: RunConfig) -> tuple[str, int]:
    sol = build_solution(cfg.solution)
    report = grid_report(
        sol,
        cfg.grid,
        cfg.derivatives,
        tolerances=cfg.tolerances,
        perturbation=cfg.perturbation,
        field_checks=cfg.field_checks,
    )
    return report.to_json(), EXIT_OK if report.passed else EXIT_CHECKS


def _azimuthal(j, points):
    phi = np.arctan2(points[:, 2], points[:, 1])
    return -j[:, 0] * np.sin(phi) + j[:, 1] * np.cos(phi)


def cmd_fields(cfg: RunConfig) -> tuple[str, int]:
    sol = build_solution(cfg.solution)
    points = grid_points(cfg.grid, sol.chart.kind)
    for x in points:
        sol.point(x)
    vals = field_values(sol, points, cfg.derivatives)
    if sol.chart.kind == "cartesian":
        comps = ["x", "y", "z"]
        j_phi = _azimuthal(vals["J"], points)
    else:
        comps = ["r", "theta", "phi"]
        j_phi = vals["J"][:, 2]
    header = _coordinate_header(sol.chart.kind) + [f"E_{c}" for c in comps] + [f"B_{c}" for c in comps] + ["J_phi"]
    rows = np.hstack([points, vals["E"], vals["B"], j_phi[:, None]])
    return csv_text(header, rows), EXIT_OK


def cmd_frame(cfg: RunConfig) -> tuple[str, int]:
    lab = inner_solution(cfg.solution)
    frame = rest_frame(lab)
    sol = frame.solution
    points = grid_points(cfg.grid, sol.chart.kind)
    samples = []
    for x in points:
        p = sol.point(x)
        m = np.asarray(sol.field.matrix(jnp.asarray(x)))
        _, _, v, s, _, _ = bilinear_parts(jnp.asarray(m))
        tetrad = frame.tetrad_at(p)
        omega = np.asarray(frame.spin_connection_at(p, cfg.derivatives).omega)
        samples.append(
            {
                "coords": [float(c) for c in x],
                "spinor_re": [float(c) for c in m[:, 0].real],
                "spinor_im": [float(c) for c in m[:, 0].imag],
                "velocity": [float(c) for c in np.asarray(v)],
                "spin": [float(c) for c in np.asarray(s)],
                "tetrad_up": np.asarray(tetrad.e_up).tolist(),
                "spin_connection": omega.tolist(),
            }
        )
    bundle = {
        "schema_version": 1,
        "family": lab.family,
        "chart": sol.chart.kind,
        "coordinates": _coordinate_header(sol.chart.kind),
        "layout": {
            "tetrad_up": "[mu][a] = e^mu_a",
            "spin_connection": "[i][j][mu] = Omega_{ij mu}",
            "velocity": "tangent upper components",
        },
        "derivatives": cfg.derivatives,
        "samples": samples,
    }
    return json_text(bundle), EXIT_OK


def cmd_normalize(cfg: RunConfig) -> tuple[str, int]:
    sol = inner_solution(cfg.solution)
    integral = normalization_integral(sol, cfg.quadrature.build())
    kappa = sol.config.kappa / float(np.sqrt(integral))
    payload = {
        "schema_version": 1,
        "family": sol.family,
        "kappa_in": sol.config.kappa,
        "integral": integral,
        "kappa": kappa,
    }
    return json_text(payload), EXIT_OK


_HANDLERS = {
    "invert": cmd_invert,
    "verify": cmd_verify,
    "fields": cmd_fields,
    "frame": cmd_frame,
    "normalize": cmd_normalize,
}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, DomainError, ValidationError)):
        return EXIT_CONFIG
    if isinstance(exc, SingularSpinor):
        return EXIT_SINGULAR
    if isinstance(exc, PathDisagreement):
        return EXIT_PATHS
    if isinstance(exc, CRDIError):
        return EXIT_CHECKS
    raise exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crdi", description="Dirac-equation inversion for spinor ansatzes.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="JSON run configuration")
        cmd.add_argument("--out", default=None, help="output file (default: stdout)")
        cmd.add_argument("--derivatives", choices=("analytic", "fd"), default=None)
        cmd.add_argument("--seed", type=int, default=None, help="grid seed (unsigned 64-bit)")
    return parser


def run(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = apply_overrides(load_config(args.config), args.derivatives, args.seed, args.out)
        text, code = _HANDLERS[args.command](cfg)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes, anything else re-raised
        code = exit_code_for(exc)
        print(f"crdi {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    _emit(text, cfg.output)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
