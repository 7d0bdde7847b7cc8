"""Command-line front end: JSON config parsing, command dispatch, and
deterministic result emission with a manifest.

Every command writes its artifact files plus ``manifest.json`` into the
output directory.  The manifest records the effective configuration, its
hash, the backend, package versions, and a digest over all emitted files;
identical (config, seed) pairs produce byte-identical numeric outputs and
therefore identical digests.

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, backend
from .dynamics import DriveSpec, drive_response, drive_response_ode, normalized_density
from .edges import (
    bulk_gap_windows,
    counter_propagating_pairs,
    disorder_robustness,
    edge_velocity,
    find_edge_modes,
    localization_profile,
)
from .errors import ConfigError, NumericalError
from .hamiltonian import (
    DisorderSpec,
    ModelParams,
    PhysicalParams,
    assemble_real_space,
    interaction_strength,
    map_physical_params,
)
from .lattice import Geometry, build_lattice, boundary_shell, coulomb_coupling
from .spectra import (
    GROUPING_TOL,
    band_gaps,
    band_structure,
    eigensolve,
    flatness,
    flatness_map,
)
from .topology import band_chern_numbers

COMMANDS = (
    "bands", "chern", "cylinder", "plane", "edges", "disorder", "drive",
    "flatness-map", "params",
)

SCHEMA_VERSION = 1

# key -> (type, default); None default means "must be provided when the
# block is required by the command".
_SCHEMA: dict[str, dict[str, tuple]] = {
    "lattice": {
        "geometry": (str, None),
        "n1": (int, None),
        "n2": (int, None),
        "orientation": (str, "zigzag"),
    },
    "model": {
        "beta_x": (float, None),
        "v_b": (float, None),
        "gamma_y": (float, 1.0),
    },
    "physical": {
        "mass_kg": (float, None),
        "omega_x": (float, None),
        "omega_y": (float, None),
        "rabi_x": (float, None),
        "rabi_y": (float, None),
        "wavevector": (float, None),
        "spacing": (float, None),
    },
    "numerics": {
        "grid_n": (int, 40),
        "cutoff_radius": (float, 12.0),
        "nn_only": (bool, False),
        "grouping_tol": (float, GROUPING_TOL),
        "gap_margin": (float, 0.02),
        "shell_width": (int, 2),
        "edge_threshold": (float, 0.5),
        "kx_points": (int, 200),
        "include_onsite_coulomb": (bool, False),
    },
    "disorder": {
        "v_b_interval": (list, None),
        "omega_interval": (list, None),
        "mode": (str, "draw"),
        "trials": (int, 20),
    },
    "drive": {
        "omega_d": (object, None),        # float or list of floats
        "t_f": (float, 1000.0),
        "amplitude": (float, 1.0),
        "dt": (float, 1e-3),
        "ode_check": (bool, False),
    },
    "sweep": {
        "v_b_range": (list, None),
        "beta_range": (list, None),
        "resolution": (int, 20),
    },
    "interaction": {
        "omega_int": (float, None),
        "eta_tilde": (float, None),
    },
    "output": {
        "directory": (str, "runs"),
        "formats": (list, ["csv", "json"]),
    },
}

_TOP_KEYS = set(_SCHEMA) | {"command", "seed"}


@dataclass
class RunConfig:
    """Validated run configuration with defaults filled."""

    command: str | None
    seed: int
    blocks: dict = field(default_factory=dict)

    def block(self, name: str) -> dict | None:
        return self.blocks.get(name)

    def require(self, name: str) -> dict:
        blk = self.blocks.get(name)
        if blk is None:
            raise ConfigError(f"command requires the '{name}' block")
        missing = [k for k, v in blk.items() if v is None]
        if missing:
            raise ConfigError(
                f"'{name}' block is missing required keys: {missing}"
            )
        return blk

    def effective(self) -> dict:
        doc = {"command": self.command, "seed": self.seed}
        doc.update({k: self.blocks[k] for k in sorted(self.blocks)})
        return doc

    def sha256(self) -> str:
        text = json.dumps(self.effective(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


def _coerce(value, typ, path):
    if typ is object or isinstance(value, bool) and typ is bool:
        return value
    if typ is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{path}: expected a boolean, got {value!r}")
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if typ is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported value {value!r}")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration; unknown keys are rejected."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if "model" in raw and "physical" in raw:
        raise ConfigError(
            "exactly one of 'model' and 'physical' may be given, found both "
            "(keys: model, physical)"
        )

    command = raw.get("command")
    if command is not None and command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; choose from {COMMANDS}")
    seed = _coerce(raw.get("seed", 0), int, "seed")

    blocks = {}
    for name, schema in _SCHEMA.items():
        if name not in raw:
            continue
        blk = raw[name]
        if not isinstance(blk, dict):
            raise ConfigError(f"{name}: expected an object")
        unknown = set(blk) - set(schema)
        if unknown:
            raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
        out = {}
        for key, (typ, default) in schema.items():
            if key in blk:
                out[key] = _coerce(blk[key], typ, f"{name}.{key}")
            else:
                out[key] = default
        blocks[name] = out
    # blocks with all-default content are still materialized for commands
    # that need them
    for name in ("numerics", "output"):
        blocks.setdefault(
            name, {k: d for k, (t, d) in _SCHEMA[name].items()}
        )
    return RunConfig(command=command, seed=seed, blocks=blocks)


def _model_params(cfg: RunConfig) -> ModelParams:
    if cfg.block("model") is not None:
        m = cfg.require("model")
        return ModelParams(
            beta_x=m["beta_x"], v_b=m["v_b"], gamma_y=m["gamma_y"]
        )
    if cfg.block("physical") is not None:
        _, mp = map_physical_params(_physical_params(cfg))
        return mp
    raise ConfigError("command requires a 'model' or 'physical' block")


def _physical_params(cfg: RunConfig) -> PhysicalParams:
    ph = cfg.require("physical")
    return PhysicalParams(
        mass=ph["mass_kg"],
        omega_x=ph["omega_x"],
        omega_y=ph["omega_y"],
        rabi_x=ph["rabi_x"],
        rabi_y=ph["rabi_y"],
        wavevector=ph["wavevector"],
        spacing=ph["spacing"],
    )


_DEFAULT_LATTICE = {
    "bands": ("torus", 1, 1),
    "chern": ("torus", 1, 1),
    "cylinder": ("cylinder", 20, 10),
    "plane": ("plane", 16, 12),
    "edges": ("plane", 16, 12),
    "disorder": ("plane", 16, 12),
    "drive": ("plane", 16, 12),
}


def _lattice(cfg: RunConfig, command: str, expect: tuple[Geometry, ...]):
    blk = cfg.block("lattice")
    if blk is None:
        geo, n1, n2 = _DEFAULT_LATTICE[command]
        return build_lattice(geo, n1, n2)
    blk = cfg.require("lattice")
    lat = build_lattice(
        blk["geometry"], blk["n1"], blk["n2"], blk["orientation"]
    )
    if lat.geometry not in expect:
        raise ConfigError(
            f"command '{command}' needs geometry in "
            f"{[g.value for g in expect]}, got {lat.geometry.value}"
        )
    return lat


def _torus_twin(cfg: RunConfig):
    """1x1 torus coupling with the run's orientation/cutoff (bulk reference)."""
    num = cfg.blocks["numerics"]
    blk = cfg.block("lattice")
    orientation = blk["orientation"] if blk else "zigzag"
    tor = build_lattice("torus", 1, 1, orientation)
    return coulomb_coupling(tor, num["cutoff_radius"], num["nn_only"])


def _coupling(cfg: RunConfig, lat):
    num = cfg.blocks["numerics"]
    return coulomb_coupling(lat, num["cutoff_radius"], num["nn_only"])


# --- command implementations -------------------------------------------------

def _cmd_bands(cfg: RunConfig, outdir: Path) -> list[Path]:
    lat = _lattice(cfg, "bands", (Geometry.TORUS, Geometry.CYLINDER))
    p = _model_params(cfg)
    num = cfg.blocks["numerics"]
    u = _coupling(cfg, lat)
    n = num["grid_n"] if lat.geometry is Geometry.TORUS else num["kx_points"]
    b = band_structure(lat, p, u, grid_n=n, grouping_tol=num["grouping_tol"],
                       include_onsite_coulomb=num["include_onsite_coulomb"])
    csv_path = outdir / "bands.csv"
    b.to_csv(csv_path)
    gaps_doc = {
        "band_groups": [list(g) for g in b.band_groups],
        "gap_windows": [
            {"below_group": w.below_group, "low": w.low, "high": w.high,
             "open": w.is_open}
            for w in band_gaps(b)
        ],
    }
    gaps_path = outdir / "gaps.json"
    gaps_path.write_text(json.dumps(gaps_doc, indent=1))
    return [csv_path, gaps_path]


def _cmd_chern(cfg: RunConfig, outdir: Path) -> list[Path]:
    lat = _lattice(cfg, "chern", (Geometry.TORUS,))
    p = _model_params(cfg)
    num = cfg.blocks["numerics"]
    u = _coupling(cfg, lat)
    res = band_chern_numbers(lat, p, u, grid_n=num["grid_n"],
                             grouping_tol=num["grouping_tol"])
    path = outdir / "chern.json"
    path.write_text(res.to_json(p))
    return [path]


def _cmd_cylinder(cfg: RunConfig, outdir: Path) -> list[Path]:
    lat = _lattice(cfg, "cylinder", (Geometry.CYLINDER,))
    p = _model_params(cfg)
    num = cfg.blocks["numerics"]
    u = _coupling(cfg, lat)
    bands = band_structure(lat, p, u, grid_n=num["kx_points"],
                           grouping_tol=num["grouping_tol"])
    csv_path = outdir / "cylinder_bands.csv"
    bands.to_csv(csv_path)
    windows = bulk_gap_windows(p, _torus_twin(cfg), grid_n=num["grid_n"],
                               margin=num["gap_margin"],
                               grouping_tol=num["grouping_tol"])
    doc = []
    for wi, w in enumerate(windows):
        try:
            crossings = edge_velocity(bands, w)
        except NumericalError:
            crossings = []
        doc.append({
            "window": list(w),
            "crossings": [
                {"k_x": c.k_x, "energy": c.energy, "slope": c.slope}
                for c in crossings
            ],
            "counter_propagating_pairs": counter_propagating_pairs(crossings)
            if crossings else 0,
        })
    branches_path = outdir / "edge_branches.json"
    branches_path.write_text(json.dumps(doc, indent=1))
    return [csv_path, branches_path]


def _plane_spectrum(cfg: RunConfig, command: str):
    lat = _lattice(cfg, command, (Geometry.PLANE,))
    p = _model_params(cfg)
    num = cfg.blocks["numerics"]
    u = _coupling(cfg, lat)
    h = assemble_real_space(lat, p, u,
                            include_onsite_coulomb=num["include_onsite_coulomb"])
    spec = eigensolve(h)
    windows = bulk_gap_windows(p, _torus_twin(cfg), grid_n=num["grid_n"],
                               margin=num["gap_margin"],
                               grouping_tol=num["grouping_tol"])
    return lat, p, u, h, spec, windows


def _cmd_plane(cfg: RunConfig, outdir: Path) -> list[Path]:
    lat, p, u, h, spec, windows = _plane_spectrum(cfg, "plane")
    num = cfg.blocks["numerics"]
    shell = boundary_shell(lat, num["shell_width"])
    flat = np.concatenate([2 * shell, 2 * shell + 1])
    weights = (np.abs(spec.modes[flat, :]) ** 2).sum(axis=0)
    csv_path = outdir / "plane_spectrum.csv"
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["mode_index", "energy", "edge_weight"])
        for l in range(spec.dim):
            wr.writerow([l, f"{spec.energies[l]:.12g}", f"{weights[l]:.12g}"])
    gaps_path = outdir / "gaps.json"
    gaps_path.write_text(json.dumps({"windows": [list(w) for w in windows]},
                                    indent=1))
    return [csv_path, gaps_path]


def _cmd_edges(cfg: RunConfig, outdir: Path) -> list[Path]:
    lat, p, u, h, spec, windows = _plane_spectrum(cfg, "edges")
    num = cfg.blocks["numerics"]
    sets = find_edge_modes(spec, windows, num["shell_width"],
                           num["edge_threshold"])
    csv_path = outdir / "edge_modes.csv"
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["window_id", "mode_index", "energy", "edge_weight", "side"])
        for wi, s in enumerate(sets):
            for row in s.to_csv_rows(wi):
                wr.writerow(row)
    paths = [csv_path]
    best = max((m for s in sets for m in s.modes),
               key=lambda m: m.edge_weight, default=None)
    if best is not None:
        profile = localization_profile(spec, best.mode_index)
        prof_path = outdir / "profile.csv"
        profile.to_csv(prof_path)
        paths.append(prof_path)
    win_path = outdir / "windows.json"
    win_path.write_text(json.dumps({"windows": [list(w) for w in windows]},
                                   indent=1))
    paths.append(win_path)
    return paths


def _cmd_disorder(cfg: RunConfig, outdir: Path, threads: int) -> list[Path]:
    lat = _lattice(cfg, "disorder", (Geometry.PLANE,))
    p = _model_params(cfg)
    num = cfg.blocks["numerics"]
    dis = cfg.require("disorder")
    u = _coupling(cfg, lat)
    windows = bulk_gap_windows(p, _torus_twin(cfg), grid_n=num["grid_n"],
                               margin=num["gap_margin"],
                               grouping_tol=num["grouping_tol"])
    spec = DisorderSpec(
        v_b_interval=tuple(dis["v_b_interval"]),
        omega_interval=tuple(dis["omega_interval"]),
        mode=dis["mode"],
        seed=cfg.seed,
    )
    report = disorder_robustness(
        p, u, spec, dis["trials"], windows[:1],
        shell_width=num["shell_width"], threshold=num["edge_threshold"],
        threads=threads,
    )
    json_path = outdir / "robustness.json"
    json_path.write_text(report.to_json())
    csv_path = outdir / "trials.csv"
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["seed", "in_gap_count", "edge_mode_count", "max_edge_weight"])
        for t in report.per_trial:
            wr.writerow([t.seed, t.in_gap_count, t.edge_mode_count,
                         f"{t.max_edge_weight:.12g}"])
    return [json_path, csv_path]


def _cmd_drive(cfg: RunConfig, outdir: Path) -> list[Path]:
    lat, p, u, h, spec, windows = _plane_spectrum(cfg, "drive")
    num = cfg.blocks["numerics"]
    drv = cfg.require("drive")
    omegas = drv["omega_d"]
    if not isinstance(omegas, list):
        omegas = [omegas]
    shell = boundary_shell(lat, num["shell_width"])
    paths = []
    sweep = []
    for wd in omegas:
        d = DriveSpec(omega_d=float(wd), t_f=drv["t_f"],
                      amplitude=drv["amplitude"])
        dens = normalized_density(drive_response(spec, d), shell)
        csv_path = outdir / f"density_wd{wd:g}.csv"
        dens.to_csv(csv_path)
        paths.append(csv_path)
        entry = {
            "omega_d": float(wd),
            "total_density": dens.total,
            "boundary_fraction": dens.boundary_fraction,
        }
        if drv["ode_check"]:
            oracle = drive_response_ode(h, d, dt=drv["dt"])
            entry["ode_max_rel_dev"] = float(
                np.abs(dens.rho - oracle.rho).max() / max(dens.rho.max(), 1e-300)
            )
        sweep.append(entry)
    sweep_path = outdir / "drive_sweep.json"
    sweep_path.write_text(json.dumps(sweep, indent=1))
    paths.append(sweep_path)
    return paths


def _cmd_flatness_map(cfg: RunConfig, outdir: Path, threads: int) -> list[Path]:
    num = cfg.blocks["numerics"]
    sw = cfg.require("sweep")
    blk = cfg.block("lattice")
    orientation = blk["orientation"] if blk else "zigzag"
    m = flatness_map(
        tuple(sw["v_b_range"]), tuple(sw["beta_range"]), sw["resolution"],
        nn_only=num["nn_only"], grid_n=num["grid_n"],
        cutoff_radius=num["cutoff_radius"], orientation=orientation,
        grouping_tol=num["grouping_tol"], threads=threads,
    )
    path = outdir / "flatness_map.csv"
    m.to_csv(path)
    return [path]


def _cmd_params(cfg: RunConfig, outdir: Path) -> list[Path]:
    pp = _physical_params(cfg)
    derived, model = map_physical_params(pp)
    doc = {
        "derived": {
            "lambda_x": derived.lambda_x,
            "lambda_y": derived.lambda_y,
            "omega_tilde_x": derived.omega_tilde_x,
            "omega_tilde_y": derived.omega_tilde_y,
            "omega_coupling": derived.omega_coupling,
            "eta_x": derived.eta_x,
            "eta_y": derived.eta_y,
            "adiabatic_ok": derived.adiabatic_ok,
            "stiff_ok": derived.stiff_ok,
            "lamb_dicke_ok": derived.lamb_dicke_ok,
        },
        "model": {
            "beta_x": model.beta_x,
            "v_b": model.v_b,
            "gamma_y": model.gamma_y,
        },
    }
    inter = cfg.block("interaction")
    if inter is not None:
        inter = cfg.require("interaction")
        num = cfg.blocks["numerics"]
        blk = cfg.block("lattice")
        orientation = blk["orientation"] if blk else "zigzag"
        tor = build_lattice("torus", 1, 1, orientation)
        u = coulomb_coupling(tor, num["cutoff_radius"], num["nn_only"])
        bands = band_structure(tor, model, u, grid_n=num["grid_n"],
                               grouping_tol=num["grouping_tol"])
        f = flatness(bands, 0)
        wtx = derived.omega_tilde_x
        res = interaction_strength(
            inter["omega_int"], inter["eta_tilde"],
            bandwidth=f.bandwidth * wtx, gap=f.gap * wtx,
        )
        doc["interaction"] = {
            "u_int": res.u_int,
            "bandwidth": res.bandwidth,
            "gap": res.gap,
            "inside_window": res.inside_window,
        }
    path = outdir / "params.json"
    path.write_text(json.dumps(doc, indent=1))
    return [path]


# --- runner ------------------------------------------------------------------

def run(cfg: RunConfig, command: str | None = None, outdir: str | Path | None = None,
        threads: int = 1) -> int:
    """Execute a command and write results plus a manifest; returns exit code."""
    t0 = time.time()
    command = command or cfg.command
    if command is None:
        raise ConfigError("no command given (CLI argument or config key)")
    if cfg.command is not None and command != cfg.command:
        raise ConfigError(
            f"config names command {cfg.command!r} but {command!r} was invoked"
        )
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    cfg.command = command

    import os
    out_base = (outdir or os.environ.get("IONPHONON_OUTDIR")
                or cfg.blocks["output"]["directory"])
    out = Path(out_base)
    out.mkdir(parents=True, exist_ok=True)

    if command == "bands":
        files = _cmd_bands(cfg, out)
    elif command == "chern":
        files = _cmd_chern(cfg, out)
    elif command == "cylinder":
        files = _cmd_cylinder(cfg, out)
    elif command == "plane":
        files = _cmd_plane(cfg, out)
    elif command == "edges":
        files = _cmd_edges(cfg, out)
    elif command == "disorder":
        files = _cmd_disorder(cfg, out, threads)
    elif command == "drive":
        files = _cmd_drive(cfg, out)
    elif command == "flatness-map":
        files = _cmd_flatness_map(cfg, out, threads)
    else:
        files = _cmd_params(cfg, out)

    outputs = {}
    for f in sorted(files):
        outputs[f.name] = hashlib.sha256(f.read_bytes()).hexdigest()
    digest = hashlib.sha256(
        json.dumps(outputs, sort_keys=True).encode()
    ).hexdigest()
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": cfg.effective(),
        "config_sha256": cfg.sha256(),
        "seed": cfg.seed,
        "backend": backend.BACKEND_NAME,
        "versions": {
            "ionphonon": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "wall_time_s": time.time() - t0,
        "outputs": outputs,
        "outputs_digest": digest,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ionphonon",
        description="Topological phonon bands of trapped-ion honeycomb arrays",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON configuration file")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for independent tasks")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    args = parser.parse_args(argv)

    try:
        text = args.config.read_text() if args.config else "{}"
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 4
    try:
        cfg = parse_config(text)
        if args.seed is not None:
            cfg.seed = args.seed
        return run(cfg, args.command, args.out, max(1, args.threads))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
