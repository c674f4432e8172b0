"""Experiment driver: config-file based runs with deterministic artifacts.

Subcommand grammar:   dampwave <experiment> --config <path> [--out <dir>]

Exit codes: 0 success, 2 configuration error, 3 numeric instability,
4 certification-check failure.  Numeric CSV output uses 17 significant
digits so 64-bit floats round-trip exactly.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .egorov import conjugation_error, conjugation_slope
from .errors import ConfigError, DampwaveError, InstabilityError, RayBlowupError
from .estimates import (
    check_exp_I_class,
    check_I_derivative_bounds,
    check_z_uniform_bounds,
)
from .parametrix import build_parametrix, conjugated_parametrix
from .quantize import (
    Grid,
    WaveField,
    apply_op,
    dealias_two_thirds,
    from_fourier,
    wave_packet,
)
from .rays import RaySystem, trace_ray
from .solver import IVPProblem, evolve
from .sqrt_symbol import build_sqrt, sqrt_residual_report
from .symbols import (
    AssumptionParams,
    SampleSpec,
    build_cutoff_b,
    check_assumption_b1,
    check_h_inequality,
    hyperbolic_a,
    multiplier_b,
    shipped_cutoff_family,
)

EXPERIMENTS = (
    "run-ivp",
    "trace-rays",
    "build-parametrix",
    "compare",
    "verify-symbol-class",
    "sqrt-check",
    "egorov-check",
)

_FAMILY_DEFAULTS = {
    "gamma": 1.0, "L": 4, "c0": 0.7, "eps_a": 0.1,
    "r0": 0.3, "x_c": 0.0, "s": 0.0, "beta0": 4.0, "h_kind": "exp_inv",
    "a_kind": "shipped", "b_kind": "cutoff",
}
_GRID_DEFAULTS = {"N": 128, "dz": 1e-3, "quad_dz": 1e-2}
_RUN_DEFAULTS = {
    "z0": 0.0, "Z": 1.0, "J": 1, "k_max": 1,
    "seed": 1234,
}


def _default_bands(n: int) -> list:
    bands, k = [], 8
    while k <= n // 3:
        bands.append(k)
        k *= 2
    return bands or [max(1, n // 8)]


def fmt(x) -> str:
    return f"{float(x):.17g}"


@dataclass
class ExperimentConfig:
    family: dict
    grid: dict
    run: dict
    output_dir: str = "out"

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}")
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        fam = {**_FAMILY_DEFAULTS, **raw.get("family", {})}
        grd = {**_GRID_DEFAULTS, **raw.get("grid", {})}
        run = {**_RUN_DEFAULTS, **raw.get("run", {})}
        if "band_K_list" not in run:
            run["band_K_list"] = _default_bands(grd["N"])
        cfg = cls(family=fam, grid=grd, run=run,
                  output_dir=raw.get("output_dir", "out"))
        cfg.validate()
        return cfg

    def validate(self):
        n = self.grid["N"]
        if not (isinstance(n, int) and n >= 8 and (n & (n - 1)) == 0):
            raise ConfigError("grid.N must be a power of two, at least 8")
        gamma, L = self.family["gamma"], self.family["L"]
        if not 2.0 * gamma < L:
            raise ConfigError("family must satisfy 2*gamma < L")
        ks = self.run["band_K_list"]
        if any(k2 <= k1 for k1, k2 in zip(ks, ks[1:])):
            raise ConfigError("band_K_list must be strictly increasing")
        if ks and max(ks) > n // 3:
            raise ConfigError("band_K_list entries must not exceed N/3")
        if self.family["a_kind"] not in ("shipped", "none"):
            raise ConfigError("family.a_kind must be 'shipped' or 'none'")
        if self.family["b_kind"] not in ("cutoff", "multiplier"):
            raise ConfigError("family.b_kind must be 'cutoff' or 'multiplier'")
        if not self.run["z0"] < self.run["Z"]:
            raise ConfigError("run.z0 must be below run.Z")

    # -- model construction ------------------------------------------------

    def params(self) -> AssumptionParams:
        return AssumptionParams(gamma=self.family["gamma"], L=self.family["L"],
                                Z=self.run["Z"], z0=self.run["z0"])

    def cutoff_family(self):
        f = self.family
        return shipped_cutoff_family(
            gamma=f["gamma"], L=f["L"], r0=f["r0"], x_c=f["x_c"], s=f["s"],
            beta0=f["beta0"], z0=self.run["z0"])

    def b_model(self):
        if self.family["b_kind"] == "multiplier":
            return multiplier_b(self.family["beta0"], self.family["gamma"])
        return build_cutoff_b(self.cutoff_family())

    def a_model(self):
        if self.family["a_kind"] == "none":
            return None
        return hyperbolic_a(self.family["c0"], self.family["eps_a"])

    def problem(self, with_a=True) -> IVPProblem:
        return IVPProblem(
            b_model=self.b_model(),
            a_model=self.a_model() if with_a else None,
            params=self.params(),
            grid=Grid(self.grid["N"]),
            dz=self.grid["dz"],
        )

    def packet_center(self) -> float:
        if "x_center" in self.run:
            return float(self.run["x_center"])
        if self.family["b_kind"] == "cutoff":
            fam = self.cutoff_family()
            return float(fam.rho_inverse(0.0))
        return 0.0


@dataclass
class _Outputs:
    directory: Path
    files: list = field(default_factory=list)

    def path(self, name: str) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        p = self.directory / name
        self.files.append(p)
        return p

    def write_csv(self, name: str, header, rows):
        p = self.path(name)
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(cell if isinstance(cell, str) else fmt(cell)
                                  for cell in row))
        p.write_text("\r\n".join(lines) + "\r\n")
        return p

    def write_json(self, name: str, payload: dict):
        p = self.path(name)
        p.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return p


def _random_band_limited(grid: Grid, seed: int, z: float) -> WaveField:
    rng = np.random.default_rng(seed)
    uhat = rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points)
    uhat[np.abs(grid.freqs) > grid.dealias_cut] = 0.0
    u = from_fourier(grid, z, uhat)
    u.values /= u.norm_l2()
    return u


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _exp_run_ivp(cfg: ExperimentConfig, out: _Outputs) -> int:
    prob = cfg.problem()
    u0 = _random_band_limited(prob.grid, cfg.run["seed"], cfg.run["z0"])
    trace = evolve(prob, u0, cfg.run["Z"])
    stride = max(1, len(trace.z_samples) // 11)
    rows = []
    for i in range(0, len(trace.fields), max(1, len(trace.fields) // 11)):
        f = trace.fields[i]
        for j, v in enumerate(f.values):
            rows.append((f.z, j, v.real, v.imag))
    out.write_csv("snapshots.csv", ["z", "j", "re", "im"], rows)
    out.write_csv("norms.csv", ["z", "l2"],
                  [(z, nv) for z, nv in zip(trace.z_samples, trace.l2_norms)])
    return 0


def _exp_trace_rays(cfg: ExperimentConfig, out: _Outputs) -> int:
    a = cfg.a_model() or hyperbolic_a(cfg.family["c0"], 0.0)
    b = cfg.b_model()
    sysr = RaySystem(a, z0=cfg.run["z0"], step_dz=cfg.grid["dz"])
    x0s = cfg.run.get("ray_x0_list", [0.0, np.pi / 2, np.pi, 3 * np.pi / 2])
    xi0s = cfg.run.get("ray_xi0_list", [8.0, 32.0])
    idx = 0
    for xi0 in xi0s:
        for x0 in x0s:
            sol = trace_ray(sysr, cfg.run["z0"], cfg.run["Z"], x0, xi0, b_model=b)
            rows = list(zip(sol.z_samples, sol.gamma_x, sol.gamma_xi, sol.I_forward))
            out.write_csv(f"ray_{idx:03d}.csv", ["z", "x", "xi", "I"], rows)
            idx += 1
    return 0


def _dump_symbol_csv(out, name, grid, table):
    ks = grid.freqs
    order = np.argsort(ks)
    rows = []
    for j in range(grid.n_points):
        for kidx in order:
            v = table[j, kidx]
            rows.append((j, int(ks[kidx]), v.real, v.imag))
    out.write_csv(name, ["j", "k", "re", "im"],
                  [(str(j), str(k), re, im) for j, k, re, im in rows])


def _exp_build_parametrix(cfg: ExperimentConfig, out: _Outputs) -> int:
    J = int(cfg.run["J"])
    Z = cfg.run["Z"]
    if cfg.family["a_kind"] == "none":
        prob = cfg.problem(with_a=False)
        ps = build_parametrix(prob, J=J, quad_dz=cfg.grid["quad_dz"])
        table = ps.assembled_table(Z).table
    else:
        prob = cfg.problem()
        cp = conjugated_parametrix(prob, J=J, quad_dz=cfg.grid["quad_dz"])
        table = cp.tilde_table(Z).table
    _dump_symbol_csv(out, "parametrix_w.csv", prob.grid, table)
    return 0


def _exp_compare(cfg: ExperimentConfig, out: _Outputs) -> int:
    J_max = int(cfg.run["J"])
    Z = cfg.run["Z"]
    x_center = cfg.packet_center()
    rows = []
    if cfg.family["a_kind"] == "none":
        prob = cfg.problem(with_a=False)
        builders = {J: build_parametrix(prob, J=J, quad_dz=cfg.grid["quad_dz"])
                    for J in range(J_max + 1)}
        apply_J = lambda J, u: apply_op(builders[J].assembled_table(Z), u)
    else:
        prob = cfg.problem()
        builders = {J: conjugated_parametrix(prob, J=J, quad_dz=cfg.grid["quad_dz"])
                    for J in range(J_max + 1)}
        apply_J = lambda J, u: builders[J].apply(u, Z)
    for K in cfg.run["band_K_list"]:
        u = dealias_two_thirds(wave_packet(prob.grid, K, x_center, z=cfg.run["z0"]))
        ud = evolve(prob, u, Z).fields[-1]
        nd = np.linalg.norm(ud.values)
        for J in range(J_max + 1):
            v = apply_J(J, u)
            rel = float(np.linalg.norm(v.values - ud.values) / nd)
            rows.append((str(K), str(J), rel))
    out.write_csv("compare.csv", ["K_band", "J", "rel_l2_error"], rows)
    return 0


def _exp_verify_symbol_class(cfg: ExperimentConfig, out: _Outputs) -> int:
    prob = cfg.problem(with_a=False)
    spec = SampleSpec(seed=cfg.run["seed"])
    reports = {
        "exp_damping_symbol_class": check_exp_I_class(prob, sample_spec=spec),
        "damping_integral_derivative_bounds": check_I_derivative_bounds(prob, sample_spec=spec),
        "depth_uniform_damping_bounds": check_z_uniform_bounds(prob, sample_spec=spec),
    }
    if cfg.family["b_kind"] == "cutoff":
        fam = cfg.cutoff_family()
        grid_y = np.logspace(-4, np.log10(fam.beta), 201)
        reports["h_derivative_bounds"] = check_h_inequality(fam, fam.L - 1, grid_y)
        L = cfg.family["L"]
        orders = [(ax, bxi, jz) for ax in range(L) for bxi in range(L - ax)
                  for jz in range(L - ax - bxi) if 0 < ax + bxi + jz < L]
        reports["structural_bound_b"] = check_assumption_b1(
            prob.b_model, prob.params, orders, sample_spec=spec)
    payload = {name: rep.to_dict() for name, rep in reports.items()}
    all_pass = all(rep.passed for rep in reports.values())
    payload["pass"] = bool(all_pass)
    out.write_json("symbol_class.json", payload)
    return 0 if all_pass else 4


def _exp_sqrt_check(cfg: ExperimentConfig, out: _Outputs) -> int:
    b = cfg.b_model()
    q = build_sqrt(b, None, int(cfg.run["k_max"]))
    rep = sqrt_residual_report(q, Grid(cfg.grid["N"]), cfg.run["band_K_list"],
                               z=cfg.run["z0"], x_center=cfg.packet_center())
    out.write_json("sqrt_check.json", rep.to_dict())
    return 0 if rep.passed else 4


def _exp_egorov_check(cfg: ExperimentConfig, out: _Outputs) -> int:
    prob = cfg.problem()
    if prob.a_model is None:
        raise ConfigError("egorov-check requires family.a_kind = 'shipped'")
    z = float(cfg.run.get("z_probe", min(0.4, cfg.run["Z"])))
    probes = [conjugation_error(prob, z, K) for K in cfg.run["band_K_list"]]
    out.write_csv("egorov.csv", ["band_K", "rel_error"],
                  [(str(p.band_K), p.rel_error) for p in probes])
    slope = conjugation_slope(probes)
    out.write_json("egorov_summary.json",
                   {"z": z, "slope": slope,
                    "band_K": [int(p.band_K) for p in probes],
                    "rel_errors": [float(p.rel_error) for p in probes]})
    return 0


_RUNNERS = {
    "run-ivp": _exp_run_ivp,
    "trace-rays": _exp_trace_rays,
    "build-parametrix": _exp_build_parametrix,
    "compare": _exp_compare,
    "verify-symbol-class": _exp_verify_symbol_class,
    "sqrt-check": _exp_sqrt_check,
    "egorov-check": _exp_egorov_check,
}


def run_experiment(name: str, cfg: ExperimentConfig, out_dir=None) -> int:
    """Run one named experiment; writes artifacts plus a manifest."""
    if name not in _RUNNERS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    t0 = time.time()
    directory = Path(out_dir if out_dir is not None else cfg.output_dir)
    out = _Outputs(directory)
    status = _RUNNERS[name](cfg, out)
    manifest = {
        "experiment": name,
        "version": __version__,
        "config": {"family": cfg.family, "grid": cfg.grid, "run": cfg.run,
                   "output_dir": str(directory)},
        "wall_time_s": time.time() - t0,
        "status": status,
        "outputs": [
            {"path": p.name,
             "sha256": hashlib.sha256(p.read_bytes()).hexdigest()}
            for p in out.files
        ],
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dampwave",
        description="Damped one-way wave laboratory: parametrix vs direct solve "
                    "with symbol-class certification.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", default=None, help="output directory override")
    args = parser.parse_args(argv)
    try:
        cfg = ExperimentConfig.from_file(args.config)
        return run_experiment(args.experiment, cfg, args.out)
    except ConfigError as e:
        print(json.dumps({"error": str(e), "kind": "config"}), file=sys.stderr)
        return 2
    except (InstabilityError, RayBlowupError) as e:
        print(json.dumps({"error": str(e), "kind": "instability"}), file=sys.stderr)
        return 3
    except DampwaveError as e:
        print(json.dumps({"error": str(e), "kind": "runtime"}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
