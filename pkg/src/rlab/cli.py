"""Batch experiment runner: config ingestion, scenario orchestration,
persistence and report emission.

Configs are flat INI-style text (``key = value`` under ``[section]``
headers), chosen over nested formats for diff-ability.  The exact grammar:

    [run]        scenario, seed, out, threads (optional)
    [grid]       n, L
    [evolve]     t_end, dt, snapshot_stride, dealias   (flow scenarios)
    [potential]  width, amplitude_v, amplitude_a1..a3, center offsets, delta
    [bootstrap]  eps0, amplification                   (nonlinear scenario)
    [scenario]   scenario-specific keys

Values are plain tokens; floats use '.' decimals.  CSV outputs print
floats with 17 significant digits and are byte-identical for identical
configs and seeds, serial or parallel.
"""

from __future__ import annotations

import argparse
import configparser
import datetime
import hashlib
import io
import json
import os
import pathlib
import sys

import numpy as np

from . import __version__
from .duhamel import denominator_sweep, series_decay_report, wave_operator
from .errors import BlowupError, ConfigError
from .estimates import (
    AdmissiblePair,
    check_bilinear,
    check_dispersive_decay,
    check_direction_partition,
    check_doi_local,
    check_smoothing,
    check_smoothing_strichartz,
    check_strichartz,
    check_summation_interpolation,
)
from .flows import BootstrapParams, EvolveConfig, evolve_linear, evolve_nonlinear, profile_of, save_trajectory
from .norms import sobolev_norm, x_norm
from .potentials import PotentialSet, certify, gaussian_potential, rescale_to_delta
from .spectral import Field, free_propagate, l2_norm, make_grid
from .sampling import sample_rng

SCENARIOS = (
    "simulate-nonlinear",
    "simulate-linear",
    "born-series",
    "wave-operator",
    "certify",
)

HARNESS_IDS = (
    "str1", "smo1", "smo2", "smo3", "ik-smostri", "dispersive", "bilin",
    "direction", "summation", "doi",
)

_DESCRIPTIONS = {
    "simulate-linear": (
        "Strang-splitting run of the linear electromagnetic flow "
        "i u_t + Lap u = a.grad u + V u from t = 1; emits snapshots and a "
        "norms.csv with L2, H10 and profile X norms per snapshot.  "
        "Exercises the global linear estimate and the profile bound."
    ),
    "simulate-nonlinear": (
        "Strang-splitting run of the quadratic flow "
        "i u_t + Lap u = a.grad u + V u + u^2 with the two-thirds dealiased "
        "square, plus the bootstrap monitor: profile H10 and X norms are "
        "checked against eps1 = A eps0 at every snapshot and any exit is "
        "reported, never clipped."
    ),
    "born-series": (
        "Iterated Duhamel formula expansion (Born series) of the linear flow: "
        "per-order H10 and X norms, consecutive ratios and the fitted "
        "geometric rate; also the regularized-denominator quadrature sweep "
        "for 1/(a + i beta).  Exercises the series contraction (C^n delta^n) "
        "and the resonance regularization identity."
    ),
    "wave-operator": (
        "Scattering comparison of the interacting and free linear flows: "
        "profiles g(tau) = e^{-i tau Lap} u(tau) on a dyadic ladder, Cauchy "
        "increments, fitted polynomial decay exponent, and the wave-operator "
        "norm quotient kappa."
    ),
    "certify": (
        "Smallness certification of a potential set: the Y norms of each "
        "component, of its <x> weighting and of its (1-Lap)^5 smoothing, "
        "plus the squares of the magnetic components, all compared with "
        "delta."
    ),
    "harness:str1": "Free-flow Strichartz bound over admissible pairs (2/p + 3/q = 3/2).",
    "harness:smo1": (
        "Homogeneous Kenig-Ponce-Vega local smoothing: half-derivative gain "
        "for e^{it Lap} in L^inf along one axis, L^2 in time and the "
        "transverse axes."
    ),
    "harness:smo2": "Dual Kenig-Ponce-Vega smoothing bound (time-integrated flow in L2).",
    "harness:smo3": "Inhomogeneous Kenig-Ponce-Vega smoothing: full-derivative gain on the retarded integral.",
    "harness:ik-smostri": "Ionescu-Kenig smoothing-Strichartz bound for the retarded integral.",
    "harness:dispersive": "Band-limited L6 dispersive decay: flatness of t * ||e^{it Lap} f_k||_L6.",
    "harness:bilin": "Bilinear multiplier bound with the L1 kernel quadrature on the right side.",
    "harness:direction": "Dominant-direction partition of frequency space (chi_1 + chi_2 + chi_3 = 1).",
    "harness:summation": "Band summation/interpolation bound with the H2 proxy for the bootstrap constant.",
    "harness:doi": "Doi-type short-horizon well-posedness quotient for the quadratic flow.",
}


def fmt(x) -> str:
    """Deterministic float formatting: '.' decimal, 17 significant digits."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) if isinstance(v, (int, float, np.floating, np.integer)) else str(v) for v in row) + "\n")
    pathlib.Path(path).write_text(buf.getvalue())


class ExperimentConfig:
    """Validated flat config; round-trips losslessly through serialization."""

    REQUIRED = {"run": ["scenario", "seed"], "grid": ["n", "L"]}

    def __init__(self, sections: dict[str, dict[str, str]]):
        self.sections = {s: dict(kv) for s, kv in sections.items()}
        missing = []
        for sec, keys in self.REQUIRED.items():
            for key in keys:
                if sec not in self.sections or key not in self.sections[sec]:
                    missing.append(f"{sec}.{key}")
        if missing:
            raise ConfigError("config is missing required keys: " + ", ".join(missing))
        scenario = self.get("run", "scenario")
        base = scenario.split(":")[0]
        if not (scenario in SCENARIOS or (base == "harness" and scenario.split(":", 1)[1] in HARNESS_IDS)):
            raise ConfigError(
                f"unknown scenario {scenario!r}; valid: "
                + ", ".join(list(SCENARIOS) + [f"harness:{h}" for h in HARNESS_IDS])
            )
        if self.getfloat("potential", "delta", 1.0) <= 0:
            raise ConfigError("potential.delta must be positive")
        if self.getfloat("bootstrap", "eps0", 1.0) <= 0:
            raise ConfigError("bootstrap.eps0 must be positive")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        parser.optionxform = str
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        return cls({s: dict(parser[s]) for s in parser.sections()})

    def get(self, section, key, default=None):
        val = self.sections.get(section, {}).get(key)
        return default if val is None else val

    def getfloat(self, section, key, default=None):
        val = self.get(section, key)
        return default if val is None else float(val)

    def getint(self, section, key, default=None):
        val = self.get(section, key)
        return default if val is None else int(val)

    def override(self, section, key, value):
        self.sections.setdefault(section, {})[key] = str(value)

    def canonical(self) -> str:
        # threads and the output directory are execution environment, not
        # experiment content: they must not change the config hash
        lines = []
        for sec in sorted(self.sections):
            for key in sorted(self.sections[sec]):
                if sec == "run" and key in ("threads", "out"):
                    continue
                lines.append(f"{sec}.{key} = {self.sections[sec][key]}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    @property
    def scenario(self) -> str:
        return self.get("run", "scenario")

    @property
    def seed(self) -> int:
        return int(self.get("run", "seed"))

    @property
    def threads(self) -> int:
        env = os.environ.get("RLAB_THREADS")
        return int(self.get("run", "threads", env if env else 1))


def build_grid(cfg: ExperimentConfig):
    return make_grid(cfg.getint("grid", "n"), cfg.getfloat("grid", "L"))


def build_potentials(cfg: ExperimentConfig, grid) -> PotentialSet:
    width = cfg.getfloat("potential", "width", 4.0)
    delta = cfg.getfloat("potential", "delta", 1.0)
    amp_v = cfg.getfloat("potential", "amplitude_v", 0.0)
    amps_a = [cfg.getfloat("potential", f"amplitude_a{i + 1}", 0.0) for i in range(3)]
    off = cfg.getfloat("potential", "center_offset", 1.0)
    centers = [(0.0, 0.0, 0.0), (off, 0.5 * off, 0.0), (0.0, off, -0.5 * off),
               (0.5 * off, 0.0, -off)]
    v = gaussian_potential(grid, centers[0], width, amp_v)
    a = tuple(gaussian_potential(grid, centers[i + 1], width, amps_a[i]) for i in range(3))
    return PotentialSet(v=v, a=a, delta_target=delta)


def build_datum(cfg: ExperimentConfig, grid, seed: int) -> Field:
    """Localized small datum: Gaussian envelope, fixed-modulus random carrier,
    optionally advanced along the free flow."""
    sigma = cfg.getfloat("scenario", "datum_width", 4.0)
    amp = cfg.getfloat("scenario", "datum_amplitude", 0.01)
    carrier = cfg.getfloat("scenario", "datum_carrier", 0.6)
    advance = cfg.getfloat("scenario", "datum_advance", 4.0)
    rng = sample_rng(seed, 0)
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    x1, x2, x3 = grid.coord_mesh
    xi0 = carrier * direction
    env = np.exp(-(x1**2 + x2**2 + x3**2) / (2.0 * sigma**2))
    data = env * np.exp(1j * (xi0[0] * x1 + xi0[1] * x2 + xi0[2] * x3))
    f = Field(grid, "physical", data.astype(np.complex128))
    f = Field(grid, "physical", f.data / l2_norm(f))
    if advance:
        f = free_propagate(f, advance)
    return Field(grid, "physical", amp * f.data)


class RunManifest:
    def __init__(self, cfg: ExperimentConfig, out_dir: pathlib.Path):
        self.cfg = cfg
        self.out_dir = out_dir
        self.started = datetime.datetime.now(datetime.timezone.utc).isoformat()
        self.artifacts: dict[str, str] = {}
        self.assertions: dict[str, bool] = {}
        self.values: dict = {}

    def add_artifact(self, path) -> None:
        p = pathlib.Path(path)
        digest = hashlib.sha256(p.read_bytes()).hexdigest()
        self.artifacts[str(p.relative_to(self.out_dir))] = digest

    def record(self, name: str, ok: bool) -> None:
        self.assertions[name] = bool(ok)

    @property
    def passed(self) -> bool:
        return all(self.assertions.values())

    def write(self) -> pathlib.Path:
        doc = {
            "config_hash": self.cfg.config_hash(),
            "config": self.cfg.sections,
            "code_version": __version__,
            "scenario": self.cfg.scenario,
            "seed": self.cfg.seed,
            "started": self.started,
            "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "artifacts": self.artifacts,
            "assertions": self.assertions,
            "values": self.values,
        }
        path = self.out_dir / "manifest.json"
        path.write_text(json.dumps(doc, sort_keys=True, indent=1))
        return path


def verify_manifest(manifest_path) -> bool:
    """True iff every artifact listed in the manifest exists with its digest."""
    manifest_path = pathlib.Path(manifest_path)
    doc = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    for rel, digest in doc["artifacts"].items():
        p = base / rel
        if not p.exists():
            return False
        if hashlib.sha256(p.read_bytes()).hexdigest() != digest:
            return False
    return True


def _run_certify(cfg, manifest, out):
    grid = build_grid(cfg)
    ps = build_potentials(cfg, grid)
    cert = certify(ps, ps.delta_target)
    path = out / "certificate.json"
    path.write_text(cert.to_json())
    manifest.add_artifact(path)
    manifest.record("certificate_pass", cert.passed)
    manifest.values["max_entry"] = max(
        v for triple in cert.entries.values() for v in triple.values()
    )


def _norm_rows(tr):
    prof = profile_of(tr)
    rows = []
    for t, u, f in zip(tr.times, tr.fields, prof.fields):
        rows.append([t, l2_norm(u), float(sobolev_norm(u, 10)),
                     float(sobolev_norm(f, 10)), float(x_norm(f))])
    return rows


def _run_simulate(cfg, manifest, out, nonlinear: bool):
    grid = build_grid(cfg)
    ps = build_potentials(cfg, grid)
    u1 = build_datum(cfg, grid, cfg.seed)
    evolve_cfg = EvolveConfig(
        t_end=cfg.getfloat("evolve", "t_end", 3.0),
        dt=cfg.getfloat("evolve", "dt", 0.01),
        snapshot_stride=cfg.getint("evolve", "snapshot_stride", 50),
        dealias=cfg.get("evolve", "dealias", "two-thirds"),
    )
    try:
        if nonlinear:
            bp = BootstrapParams(
                eps0=cfg.getfloat("bootstrap", "eps0", 0.05),
                amplification=cfg.getfloat("bootstrap", "amplification", 4.0),
                delta=ps.delta_target,
            )
            tr = evolve_nonlinear(u1, ps, evolve_cfg, bootstrap=bp,
                                  skip_certification=True)
            mon = tr.meta["bootstrap"]
            manifest.record("bootstrap_contained", not mon["exited"])
            manifest.values["bootstrap"] = mon
        else:
            tr = evolve_linear(u1, ps, evolve_cfg, skip_certification=True)
        manifest.record("guard_clean", True)
    except BlowupError as exc:
        manifest.record("guard_clean", False)
        manifest.values["blowup"] = str(exc)
        return
    rows = _norm_rows(tr)
    path = out / "norms.csv"
    write_csv(path, ["t", "l2", "h10", "profile_h10", "profile_x"], rows)
    manifest.add_artifact(path)
    snap_dir = out / "snapshots"
    for p in save_trajectory(tr, snap_dir, cfg.config_hash()):
        manifest.add_artifact(p)


def _run_born(cfg, manifest, out):
    grid = build_grid(cfg)
    ps = build_potentials(cfg, grid)
    delta = cfg.getfloat("scenario", "delta", None)
    if delta is not None:
        ps = rescale_to_delta(ps, delta).potentials
    u1 = build_datum(cfg, grid, cfg.seed)
    rep = series_decay_report(
        u1, ps,
        cfg.getint("scenario", "orders", 6),
        cfg.getfloat("scenario", "t", 14.0),
        cfg.getfloat("scenario", "dt", 0.01),
        compare_with_flow=True,
    )
    path = out / "series.csv"
    write_csv(path, ["n", "h10_norm", "x_norm", "ratio"],
              [[r["n"], r["h10_norm"], r["x_norm"], r["ratio"]] for r in rep.rows()])
    manifest.add_artifact(path)
    sweep = denominator_sweep()
    path2 = out / "denominator_sweep.csv"
    write_csv(path2, ["a", "beta", "tau_max", "dtau", "value_re", "value_im", "residual"],
              [[r["a"], r["beta"], r["tau_max"], r["dtau"], r["value_re"],
                r["value_im"], r["residual"]] for r in sweep])
    manifest.add_artifact(path2)
    # ratios among the potential-dressed terms (order >= 1); the 0 -> 1
    # ratio mixes in the datum's overlap geometry and is reported but not
    # part of the band assertion
    ratios = rep.ratios_h10[1:]
    band_ok = (max(ratios) / min(ratios) <= 2.0) if min(ratios) > 0 else False
    manifest.record("geometric_band", band_ok)
    manifest.record("rate_positive", rep.rate > 0)
    manifest.values["fitted_rate"] = rep.rate
    manifest.values["partial_sum_errors"] = rep.partial_sum_errors


def _run_wave(cfg, manifest, out):
    grid = build_grid(cfg)
    ps = build_potentials(cfg, grid)
    u1 = build_datum(cfg, grid, cfg.seed)
    res = wave_operator(
        u1, ps,
        cfg.getfloat("scenario", "T", 16.0),
        cfg.getfloat("scenario", "dt", 0.05),
        skip_certification=True,
    )
    path = out / "trace.csv"
    write_csv(path, ["tau", "cauchy_distance"],
              [[r["tau"], r["cauchy_distance"]] for r in res.rows()])
    manifest.add_artifact(path)
    tail = res.distances[1:]
    manifest.record("monotone_trace", all(b < a for a, b in zip(tail, tail[1:])))
    manifest.record("positive_exponent", res.exponent > 0)
    manifest.values["exponent"] = res.exponent
    prof1 = free_propagate(u1, -1.0)
    rhs = float(sobolev_norm(prof1, 10)) + float(x_norm(prof1))
    lhs = float(sobolev_norm(res.field, 10)) + float(x_norm(res.field))
    manifest.values["kappa"] = lhs / rhs


def _run_harness(cfg, manifest, out):
    grid = build_grid(cfg)
    estimate_id = cfg.scenario.split(":", 1)[1]
    seed = cfg.seed
    threads = cfg.threads
    samples = cfg.getint("scenario", "samples", 8)
    axis = cfg.getint("scenario", "axis", 0)
    band = cfg.getint("scenario", "band", 0)
    if estimate_id == "str1":
        pair = AdmissiblePair(cfg.getfloat("scenario", "p", 2.0),
                              cfg.getfloat("scenario", "q", 6.0))
        rep = check_strichartz(grid, pair, samples, seed=seed, threads=threads,
                               k_lo=cfg.getint("scenario", "k_lo", -3),
                               k_hi=cfg.getint("scenario", "k_hi", 3))
    elif estimate_id in ("smo1", "smo2", "smo3"):
        variant = {"smo1": "homogeneous", "smo2": "dual", "smo3": "inhomogeneous"}[estimate_id]
        rep = check_smoothing(grid, variant, axis, samples, band=band,
                              seed=seed, threads=threads)
    elif estimate_id == "ik-smostri":
        pair = AdmissiblePair(cfg.getfloat("scenario", "p", 2.0),
                              cfg.getfloat("scenario", "q", 6.0))
        rep = check_smoothing_strichartz(grid, pair, axis, samples, band=band,
                                         seed=seed, threads=threads)
    elif estimate_id == "dispersive":
        rep = check_dispersive_decay(grid, band)
    elif estimate_id == "bilin":
        from .spectral import identity_symbol

        rep = check_bilinear(grid, identity_symbol(), identity_symbol(),
                             2.0, 2.0, 1.0, samples, seed=seed, threads=threads)
    elif estimate_id == "direction":
        rep = check_direction_partition(grid)
    elif estimate_id == "summation":
        rep = check_summation_interpolation(
            grid, band, 2.0, 6.0, cfg.getfloat("scenario", "c", 0.25),
            samples, horizon=(1.0, 2.5), seed=seed, threads=threads)
    elif estimate_id == "doi":
        ps = build_potentials(cfg, grid)
        u1 = build_datum(cfg, grid, seed)
        rep = check_doi_local(u1, ps, cfg.getfloat("scenario", "T", 2.0),
                              cfg.getfloat("scenario", "dt", 0.01))
    else:
        raise ConfigError(f"unknown estimate id {estimate_id!r}")
    path = out / "report.json"
    path.write_text(rep.to_json())
    manifest.add_artifact(path)
    path2 = out / "report.csv"
    write_csv(path2, ["sample", "ratio"],
              [[r["sample"], r["ratio"]] for r in rep.csv_rows()])
    manifest.add_artifact(path2)
    manifest.record("ratios_finite", bool(np.isfinite(rep.max_ratio)))
    manifest.values["max_ratio"] = rep.max_ratio
    manifest.values["median_ratio"] = rep.median_ratio


def run(cfg: ExperimentConfig, out_dir) -> RunManifest:
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg, out)
    scenario = cfg.scenario
    if scenario == "certify":
        _run_certify(cfg, manifest, out)
    elif scenario == "simulate-linear":
        _run_simulate(cfg, manifest, out, nonlinear=False)
    elif scenario == "simulate-nonlinear":
        _run_simulate(cfg, manifest, out, nonlinear=True)
    elif scenario == "born-series":
        _run_born(cfg, manifest, out)
    elif scenario == "wave-operator":
        _run_wave(cfg, manifest, out)
    elif scenario.startswith("harness:"):
        _run_harness(cfg, manifest, out)
    else:  # pragma: no cover - guarded by config validation
        raise ConfigError(f"unknown scenario {scenario!r}")
    manifest.write()
    return manifest


def describe(scenario: str) -> str:
    if scenario not in _DESCRIPTIONS:
        raise ConfigError(
            f"unknown scenario {scenario!r}; valid: " + ", ".join(sorted(_DESCRIPTIONS))
        )
    return f"{scenario}: {_DESCRIPTIONS[scenario]}"


def _manifest_ratio_rows(doc_a: dict, doc_b: dict) -> list[list]:
    rows = []
    va, vb = doc_a.get("values", {}), doc_b.get("values", {})
    for key in sorted(set(va) & set(vb)):
        a, b = va[key], vb[key]
        if isinstance(a, (int, float)) and isinstance(b, (int, float)) and a != 0:
            rows.append([key, a, b, b / a])
    return rows


def compare(manifest_a, manifest_b) -> list[list]:
    """Ratio-by-ratio diff of two manifests of the same scenario.

    Returns only rows that actually differ; identical runs give an empty
    diff.  Scalar manifest values are compared as b/a ratios (the tool
    behind the delta-halving and dt-halving runs).
    """
    doc_a = json.loads(pathlib.Path(manifest_a).read_text())
    doc_b = json.loads(pathlib.Path(manifest_b).read_text())
    if doc_a["scenario"] != doc_b["scenario"]:
        raise ConfigError(
            f"cannot compare scenarios {doc_a['scenario']!r} and {doc_b['scenario']!r}"
        )
    rows = []
    for key, a, b, ratio in _manifest_ratio_rows(doc_a, doc_b):
        if a != b:
            rows.append([key, a, b, ratio])
    if doc_a["artifacts"] != doc_b["artifacts"]:
        same = doc_a["artifacts"].keys() & doc_b["artifacts"].keys()
        for rel in sorted(same):
            if doc_a["artifacts"][rel] != doc_b["artifacts"][rel]:
                rows.append([f"artifact:{rel}", doc_a["artifacts"][rel][:12],
                             doc_b["artifacts"][rel][:12], float("nan")])
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rlab",
        description="pseudo-spectral laboratory for small-data Schroedinger scattering diagnostics",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute a scenario from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=None)

    p_desc = sub.add_parser("describe", help="describe a scenario")
    p_desc.add_argument("scenario")

    p_cmp = sub.add_parser("compare", help="diff two run manifests")
    p_cmp.add_argument("manifest_a")
    p_cmp.add_argument("manifest_b")

    args = parser.parse_args(argv)
    try:
        if args.verb == "describe":
            print(describe(args.scenario))
            return 0
        if args.verb == "compare":
            rows = compare(args.manifest_a, args.manifest_b)
            if not rows:
                print("no differences")
            else:
                print("key,a,b,ratio")
                for row in rows:
                    print(",".join(fmt(v) if isinstance(v, (int, float)) else str(v) for v in row))
            return 0
        cfg = ExperimentConfig.from_file(args.config)
        if args.seed is not None:
            cfg.override("run", "seed", args.seed)
        if args.threads is not None:
            cfg.override("run", "threads", args.threads)
        out_dir = args.out or cfg.get("run", "out", "runs/" + cfg.scenario)
        manifest = run(cfg, out_dir)
        status = "pass" if manifest.passed else "FAIL"
        print(f"{cfg.scenario}: {status} (out: {out_dir})")
        for name, ok in manifest.assertions.items():
            print(f"  {name}: {'pass' if ok else 'FAIL'}")
        return 0 if manifest.passed else 1
    except (ConfigError, BlowupError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
