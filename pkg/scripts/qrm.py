"""
Command line front end for quantum reset models.

Loads a model (JSON file or named preset), runs one analysis and writes a JSON or
CSV artifact to --out. Every artifact starts with a header carrying the model hash,
tool version and tolerances, so identical runs give byte-identical files.

Usage:
    uv run python -m scripts.qrm spectrum --preset three-qubit --g 0
    uv run python -m scripts.qrm steady --preset three-qubit --g 0.01 -K 3
    uv run python -m scripts.qrm steady --model model.json --g-grid 1e-3:1e-1:5:log
    uv run python -m scripts.qrm coup --preset qubit-n-qubit --set n=5
    uv run python -m scripts.qrm markov --preset three-qubit --t-grid 0.01,0.1,1,10 --format csv
    uv run python -m scripts.qrm dynamics --preset three-qubit --g-grid 0.01:0.04:3:log
    uv run python -m scripts.qrm example --preset three-qubit --set u=2
    uv run python -m scripts.qrm verify --seed 7

Exit codes: 0 ok, 1 configuration, 2 model invariant, 3 assumption (Spec/Coup), 4 residual.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import scipy.linalg
from pydantic import ValidationError

from env_settings import ENV_SETTINGS, Settings, use_settings
from utils.artifacts import header_block, write_csv, write_json
from utils.dynamics import (
    approach_time_scaling,
    error_scaling_sweep,
    exact_steady_state,
    propagate_exact,
    propagate_reduced,
    spectral_gap_diagnostics,
)
from utils.errors import AssumptionError, ConfigError, ModelInvariantError, QrmError, ResidualError
from utils.linalg import basis_operator, tensor3
from utils.markov import (
    chapman_kolmogorov_deviation,
    rate_matrix_from_phi,
    stationary_distribution,
    transition_probabilities,
)
from utils.model import build_lindbladian
from utils.models.presets import ThreeQubitParams
from utils.models.qrm import QrmModel
from utils.models.run_config import RunConfig, parse_grid
from utils.perturbation import (
    build_phi,
    check_coup,
    effective_hamiltonians,
    resolvent_steady_state,
    series_steady_state,
    steady_state_series,
)
from utils.presets import (
    build_qubit_n_qubit,
    closed_form_kernel_xj,
    load_preset,
    phi_d_in_level_order,
    qubit_n_qubit_phi_d,
    three_qubit_as_qubit_n_qubit,
    three_qubit_closed_forms,
    three_qubit_hamiltonian_matrix,
    three_qubit_operators,
    three_qubit_transition_probabilities,
)
from utils.spectrum import uncoupled_eigentable
from utils.verification import reorder_to_levels, run_suite, three_qubit_deviation

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s",
)
log = logging.getLogger(__name__)

DEFAULT_S_GRID = [0.01, 0.1, 1.0, 10.0]
DEFAULT_DYNAMICS_G = [0.01, 0.02, 0.04]
REGRESSION_TOL = 1e-9


class QrmArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(message)


class Artifact:
    """Payload of one run, with an optional flat table for CSV output."""

    def __init__(self, payload: dict, columns: list[str], rows: list[list]):
        self.payload = payload
        self.columns = columns
        self.rows = rows


def _pair(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def build_parser() -> QrmArgumentParser:
    common = QrmArgumentParser(add_help=False)
    source = common.add_argument_group("model")
    source.add_argument("--model", type=Path, help="Model JSON file (complex entries as [re, im])")
    source.add_argument("--preset", choices=["three-qubit", "qubit-n-qubit"], help="Named model")
    source.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Preset parameter override")
    source.add_argument("--drive", action="store_true", help="Three-qubit preset: keep the bare energies in L_0")

    run = common.add_argument_group("run")
    run.add_argument("--g", type=float, help="Coupling constant")
    run.add_argument("--g-grid", help="Coupling grid a:b:n, a:b:n:log or a comma separated list")
    run.add_argument("--t-grid", help="Time grid (s = g^2 t units), same syntax as --g-grid")
    run.add_argument("-K", "--order", type=int, default=ENV_SETTINGS.series_order, help="Series order")
    run.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE", help="Tolerance override")
    run.add_argument("--seed", type=int, default=ENV_SETTINGS.seed, help="Seed for randomized checks")
    run.add_argument("--out", type=Path, default=ENV_SETTINGS.output_path, help="Artifact directory")
    run.add_argument("--format", choices=["json", "csv"], default="json", help="Artifact format")
    run.add_argument("--quiet", action="store_true", help="Only log warnings")

    parser = QrmArgumentParser(prog="qrm", description="Quantum reset model analysis")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    subparsers.add_parser("spectrum", parents=[common], help="Spectrum of L_g")
    subparsers.add_parser("steady", parents=[common], help="Steady state by series, resolvent and null space")
    subparsers.add_parser("coup", parents=[common], help="Phi_D and the Coup criterion")
    subparsers.add_parser("markov", parents=[common], help="Rate matrix and transition probabilities")
    subparsers.add_parser("dynamics", parents=[common], help="Exact versus reduced propagation")
    subparsers.add_parser("example", parents=[common], help="Closed forms of a preset against the generic machinery")
    verify = subparsers.add_parser("verify", parents=[common], help="Oracle-equivalence suite")
    verify.add_argument("--only", action="append", help="Run only the named check")
    return parser


def _key_values(items: list[str], what: str) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"{what} expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def build_config(args: argparse.Namespace, argv: list[str]) -> RunConfig:
    try:
        tolerances = {k: float(v) for k, v in _key_values(args.tol, "--tol").items()}
        return RunConfig(
            subcommand=args.subcommand,
            model_path=args.model,
            preset=args.preset,
            overrides=_key_values(args.set, "--set"),
            drive=args.drive,
            g=args.g,
            g_grid=parse_grid(args.g_grid) if args.g_grid else None,
            t_grid=parse_grid(args.t_grid) if args.t_grid else None,
            order=args.order,
            tolerances=tolerances,
            seed=args.seed,
            out_dir=args.out,
            format=args.format,
            only=getattr(args, "only", None),
            command=" ".join(["qrm", *argv]),
        )
    except (ValidationError, ValueError) as e:
        raise ConfigError(e.errors()[0]["msg"] if isinstance(e, ValidationError) else str(e)) from e


def load_model(config: RunConfig) -> tuple[QrmModel, object | None]:
    if config.preset is not None:
        try:
            return load_preset(config.preset, config.overrides, config.drive)
        except ValidationError as e:
            raise ModelInvariantError(f"preset {config.preset}: {e.errors()[0]['msg']}") from e

    try:
        with open(config.model_path) as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read model file: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"model file is not valid JSON: {e}") from e
    try:
        return QrmModel.from_dict(data), None
    except ValidationError as e:
        error = e.errors()[0]
        location = ".".join(str(part) for part in error["loc"])
        raise ModelInvariantError(f"{location}: {error['msg']}") from e


def run_settings(config: RunConfig) -> Settings:
    """Environment settings with the --tol overrides of this run applied."""
    for name, value in config.tolerances.items():
        log.info(f"{name} set to {value:g} for this run")
    return ENV_SETTINGS.model_copy(update=config.tolerances)


def _real_lines(values: np.ndarray) -> list[float]:
    """Distinct real parts, merged within spectral_tol."""
    lines: list[float] = []
    for x in np.sort(values.real):
        if not lines or x - lines[-1] > ENV_SETTINGS.spectral_tol * max(1.0, abs(x)):
            lines.append(float(x))
    return lines


def _spectrum_entries(values: np.ndarray, families: list[str | None], residuals: np.ndarray) -> list[dict]:
    """Eigenvalues of one family merged within spectral_tol, with multiplicity and worst residual."""
    clusters: list[list] = []
    for i in np.lexsort((values.imag, values.real)):
        value, family = complex(values[i]), families[i]
        tol = ENV_SETTINGS.spectral_tol * max(1.0, abs(value))
        match = next((c for c in clusters if c[1] == family and abs(c[0] - value) <= tol), None)
        if match is None:
            clusters.append([value, family, 1, float(residuals[i])])
        else:
            match[2] += 1
            match[3] = max(match[3], float(residuals[i]))
    return [
        {"eigenvalue": _pair(value), "family": family, "multiplicity": count, "residual": residual}
        for value, family, count, residual in clusters
    ]


def run_spectrum(config: RunConfig, model: QrmModel, params) -> Artifact:
    spectra = []
    rows = []
    for g in config.g_values or [model.g]:
        lindbladian = build_lindbladian(model, g).matrix
        values, vectors = scipy.linalg.eig(lindbladian)
        if g == 0:
            # the product eigenbasis carries the family tags
            table = uncoupled_eigentable(model)
            entries = _spectrum_entries(
                np.array([e.eigenvalue for e in table]),
                [e.family for e in table],
                np.array([e.residual for e in table]),
            )
        else:
            residuals = np.linalg.norm(lindbladian @ vectors - vectors * values, axis=0) / np.linalg.norm(vectors, axis=0)
            entries = _spectrum_entries(values, [None] * len(values), residuals)
        values = values[np.lexsort((values.imag, values.real))]
        lines = _real_lines(values)
        log.info(f"g = {g:g}: {len(values)} eigenvalues on {len(lines)} vertical lines, {len(entries)} distinct")
        spectra.append({
            "g": g,
            "entries": entries,
            "eigenvalues": [_pair(v) for v in values],
            "real_lines": lines,
            "max_real_part": float(values.real.max()),
        })
        rows.extend([g, i, float(v.real), float(v.imag)] for i, v in enumerate(values))
    payload = {
        "dissipator_rates": [0.0, -model.gamma_a, -model.gamma_b, -(model.gamma_a + model.gamma_b)],
        "spectra": spectra,
    }
    return Artifact(payload, ["g", "index", "re", "im"], rows)


def run_steady(config: RunConfig, model: QrmModel, params) -> Artifact:
    series = steady_state_series(model, order=config.order, with_map=True)
    states = []
    rows = []
    for g in config.g_values or [model.g]:
        oracle = exact_steady_state(model, g) if g != 0 else series.coefficients[0]
        if series.g0 is None or abs(g) < series.g0:
            solved = resolvent_steady_state(model, g)
        else:
            log.warning(f"g = {g:g} is beyond the series radius {series.g0:.4g}; reporting the null-space state")
            solved = None
        truncated = series_steady_state(series, model, g)
        rho = oracle if solved is None else solved.rho
        residual = float(np.linalg.norm(build_lindbladian(model, g).matrix @ rho.reshape(-1, order="F")))
        tolerance = ENV_SETTINGS.residual_tol * max(1.0, float(np.max(np.abs(model.h_coupling))))
        if residual > tolerance:
            raise ResidualError(f"steady state at g = {g:g} has residual {residual:.3e} > {tolerance:.1e}")
        method = "null-space" if solved is None else solved.method
        series_distance = float(np.linalg.norm(truncated.rho - oracle))
        oracle_distance = float(np.linalg.norm(rho - oracle))
        log.info(f"g = {g:g}: residual {residual:.2e}, order-{config.order} series off by {series_distance:.2e}")
        states.append({
            "g": g,
            "method": method,
            "rho": rho,
            "residual": residual,
            "series_residual": truncated.residual,
            "series_distance": series_distance,
            "oracle_distance": oracle_distance,
        })
        rows.append([g, method, residual, truncated.residual, series_distance, oracle_distance])
    payload = {
        "order": series.order,
        "branch": series.branch,
        "g0": series.g0,
        "hierarchy_residuals": series.hierarchy_residuals,
        "leading": series.coefficients[0],
        "states": states,
    }
    columns = ["g", "method", "residual", "series_residual", "series_distance", "oracle_distance"]
    return Artifact(payload, columns, rows)


def run_coup(config: RunConfig, model: QrmModel, params) -> Artifact:
    phi = build_phi(model)
    report = check_coup(phi)
    eff = effective_hamiltonians(model) if model.h_c_is_zero else None
    payload = {
        "diag_basis": phi.diag_basis,
        "energies": phi.energies,
        "phi_d": phi.phi_d,
        "h_route_deviation": phi.h_route_deviation,
        "coup": report.model_dump(mode="json"),
        "spec_simple": None if eff is None else eff.spec_simple,
    }
    rows = [[j, k, float(phi.phi_d[j, k])] for j in range(phi.n) for k in range(phi.n)]
    artifact = Artifact(payload, ["j", "k", "phi_d"], rows)
    if not report.holds:
        write_artifact(config, model, artifact)
        raise AssumptionError(f"Coup fails: rank Phi_D = {report.rank}, need {report.n - 1}")
    log.info(f"Coup holds; leading populations {np.array2string(report.kernel, precision=6)}")
    return artifact


def run_markov(config: RunConfig, model: QrmModel, params) -> Artifact:
    phi = build_phi(model)
    rates = rate_matrix_from_phi(phi)
    s_values = config.t_grid or DEFAULT_S_GRID
    kernels = []
    rows = []
    for s in s_values:
        kernel = transition_probabilities(rates, s)
        kernels.append({"s": s, "p": kernel.p, "clamped": kernel.clamped})
        rows.extend([s, i, j, float(kernel.p[i, j])] for i in range(rates.n_states) for j in range(rates.n_states))
    payload = {
        "labels": rates.labels,
        "q": rates.q,
        "coup_holds": rates.coup_holds,
        "stationary": stationary_distribution(rates),
        "jump_rates": rates.jump_rates,
        "kernels": kernels,
        "chapman_kolmogorov": chapman_kolmogorov_deviation(rates, s_values[0], s_values[-1]),
    }
    try:
        payload["mean_first_passage_to_0"] = rates.mean_first_passage_times(0)
    except np.linalg.LinAlgError:
        log.warning("state 0 is not reachable from every state; no mean first passage times")
    return Artifact(payload, ["s", "i", "j", "p"], rows)


def run_dynamics(config: RunConfig, model: QrmModel, params) -> Artifact:
    g_values = config.g_values or ([model.g] if model.g > 0 else DEFAULT_DYNAMICS_G)
    if any(g <= 0 for g in g_values):
        raise ConfigError("dynamics needs positive couplings")
    n_c = model.dims.n_c
    rho0 = tensor3(model.tau_a, basis_operator(n_c - 1, n_c - 1, n_c), model.tau_b)
    s_values = np.asarray(config.t_grid or np.geomspace(1.0, 5.0, 12).tolist())

    phi = build_phi(model)
    runs = []
    rows = []
    for g in g_values:
        times = s_values / g**2
        exact = propagate_exact(model, rho0, times, g)
        reduced = propagate_reduced(model, rho0, times, g, phi)
        steady = exact_steady_state(model, g)
        errors = exact.distances(reduced)
        to_steady = [float(np.linalg.norm(s - steady)) for s in exact.states]
        runs.append({"g": g, "times": times, "errors": errors, "dist_to_steady": to_steady})
        rows.extend([g, float(t), float(e), d] for t, e, d in zip(times, errors, to_steady))

    payload = {"rho0": rho0, "runs": runs, "gap": spectral_gap_diagnostics(model, g_values[0]).model_dump(mode="json")}
    if len(g_values) >= 2:
        approach = approach_time_scaling(model, rho0, g_values)
        sweep = error_scaling_sweep(model, rho0, g_values, horizon=(float(s_values[0]), float(s_values[-1])))
        payload["approach"] = approach.model_dump(mode="json")
        payload["remainder_fit"] = None if sweep.fit is None else sweep.fit.model_dump(mode="json")
    return Artifact(payload, ["g", "t", "error", "dist_to_steady"], rows)


def run_example(config: RunConfig, model: QrmModel, params) -> Artifact:
    if isinstance(params, ThreeQubitParams):
        return _three_qubit_example(config, params)
    return _qubit_n_qubit_example(model, params)


def _three_qubit_example(config: RunConfig, p: ThreeQubitParams) -> Artifact:
    closed = three_qubit_closed_forms(p)
    s_values = config.t_grid or DEFAULT_S_GRID
    deviation = three_qubit_deviation(p, s_values)
    mapped, relabel = three_qubit_as_qubit_n_qubit(p)
    _, coupling = three_qubit_operators(p)
    mapping_gap = float(np.max(np.abs(relabel @ build_qubit_n_qubit(mapped).h_coupling @ relabel - coupling)))
    payload = {
        "closed_forms": closed.model_dump(mode="json"),
        "hamiltonian": three_qubit_hamiltonian_matrix(p, config.g if config.g is not None else p.g),
        "transition_probabilities": [
            {"s": s, "p": three_qubit_transition_probabilities(p, s)} for s in s_values
        ],
        "machinery_deviation": deviation,
        "qubit_n_qubit_mapping_deviation": mapping_gap,
    }
    _regression(max(deviation, mapping_gap))
    rows = [[s, i, j, float(three_qubit_transition_probabilities(p, s)[i, j])] for s in s_values for i in (0, 1) for j in (0, 1)]
    return Artifact(payload, ["s", "i", "j", "p"], rows)


def _qubit_n_qubit_example(model: QrmModel, p) -> Artifact:
    closed = closed_form_kernel_xj(p)
    phi = build_phi(model)
    numeric_phi_d = phi_d_in_level_order(phi)
    kernel = reorder_to_levels(np.diag(check_coup(phi).kernel), phi.basis).diagonal()
    deviation = max(
        float(np.max(np.abs(qubit_n_qubit_phi_d(p) - numeric_phi_d))),
        float(np.max(np.abs(closed.x_recursive / closed.z - kernel))),
        float(np.max(np.abs(closed.x_recursive - closed.x_explicit))),
    )
    payload = {
        "x_recursive": closed.x_recursive,
        "x_explicit": closed.x_explicit,
        "z": closed.z,
        "y": closed.y,
        "phi_d": qubit_n_qubit_phi_d(p),
        "machinery_deviation": deviation,
    }
    _regression(deviation)
    rows = [[j, float(x), float(y)] for j, (x, y) in enumerate(zip(closed.x_recursive, closed.x_explicit))]
    return Artifact(payload, ["j", "x_recursive", "x_explicit"], rows)


def _regression(deviation: float) -> None:
    if deviation > REGRESSION_TOL:
        raise ResidualError(f"closed forms differ from the generic machinery by {deviation:.3e}")
    log.info(f"closed forms match the generic machinery to {deviation:.2e}")


def run_verify(config: RunConfig, model: QrmModel | None, params) -> Artifact:
    try:
        results = run_suite(config.seed, config.only)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    payload = {"checks": [r.model_dump(mode="json") for r in results]}
    rows = [[r.name, r.passed, r.value, r.threshold, r.cases, r.enforced] for r in results]
    return Artifact(payload, ["name", "passed", "value", "threshold", "cases", "enforced"], rows)


HANDLERS = {
    "spectrum": run_spectrum,
    "steady": run_steady,
    "coup": run_coup,
    "markov": run_markov,
    "dynamics": run_dynamics,
    "example": run_example,
    "verify": run_verify,
}


def write_artifact(config: RunConfig, model: QrmModel | None, artifact: Artifact) -> Path:
    header = header_block(None if model is None else model.model_hash(), config.seed, config.command)
    path = config.out_dir / f"{config.subcommand}.{config.format}"
    if config.format == "csv":
        write_csv(path, header, artifact.columns, artifact.rows)
    else:
        write_json(path, header, artifact.payload)
    log.info(f"Wrote {path}")
    return path


def run(config: RunConfig) -> int:
    with use_settings(run_settings(config)):
        model, params = (None, None) if config.subcommand == "verify" else load_model(config)
        artifact = HANDLERS[config.subcommand](config, model, params)
        write_artifact(config, model, artifact)
    if config.subcommand == "verify":
        failed = [r["name"] for r in artifact.payload["checks"] if r["enforced"] and not r["passed"]]
        if failed:
            raise ResidualError(f"verification failed: {', '.join(failed)}")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = build_parser().parse_args(argv)
        if args.quiet:
            logging.getLogger().setLevel(logging.WARNING)
        return run(build_config(args, argv))
    except QrmError as e:
        print(e.diagnostic(), file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
