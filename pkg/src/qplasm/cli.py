"""Command-line front end: ``qplasm run | validate | sweep``.

Configs are TOML files with a top-level ``scenario`` key and sections named
after the modules they drive.  Physical quantities carry unit suffixes
(``_nm``, ``_deg``, ``_rad``, ``_rad_s``); bare names are rejected.

Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import math
import os
import re
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, estimate, mc, transduce
from .config import parse_toml
from .errors import (CatalogError, ConfigError, DomainError, ModelError, NumericalError,
                     ResourceError)

log = logging.getLogger("qplasm")

SCENARIOS = ("reflectance-sweep", "sensitivity", "lsp", "bounds", "montecarlo", "compare")

# bare physical names and the suffixed key that should be used instead
UNITLESS_REJECT = {
    "metal_thickness": "metal_thickness_nm", "wavelength": "wavelength_nm",
    "wavelength_min": "wavelength_min_nm", "wavelength_max": "wavelength_max_nm",
    "theta": "theta_deg", "theta_min": "theta_min_deg", "theta_max": "theta_max_deg",
    "radius": "radius_nm", "delta_phi": "delta_phi_rad", "phi": "phi_rad",
    "plasma_frequency": "plasma_frequency_rad_s", "damping": "damping_rad_s",
}

_num = (int, float)
SCHEMA = {
    "transduce": {
        "materials_file": str, "prism": str, "prism_index": _num, "metal": str,
        "metal_eps_real": _num, "metal_eps_imag": _num, "metal_thickness_nm": _num,
        "analyte_index": _num, "wavelength_nm": _num, "wavelength_min_nm": _num,
        "wavelength_max_nm": _num, "theta_min_deg": _num, "theta_max_deg": _num,
        "theta_deg": _num, "points": int,
    },
    "lsp": {
        "materials_file": str, "metal": str, "medium_index": _num, "radius_nm": _num,
        "wavelength_min_nm": _num, "wavelength_max_nm": _num, "points": int,
    },
    "bounds": {
        "entries": list, "nu": int, "T": _num, "eta": _num, "eta_a": _num, "eta_b": _num,
        "N": _num, "alpha": _num, "r": _num, "eta_e": _num, "eta_i": _num, "N_i": _num,
        "beta": _num, "delta_phi_rad": _num,
    },
    "mc": {
        "kind": str, "probes": list, "N": _num, "T": _num, "eta": _num, "eta_a": _num,
        "eta_b": _num, "nu": int, "reference_nu": int, "samples": int, "theta_deg": _num,
    },
    "experiment": {
        "label": str, "kind": str, "probe": str, "N": _num, "T": _num, "eta": _num,
        "eta_a": _num, "eta_b": _num, "nu": int, "reference_nu": int, "samples": int,
        "theta_deg": _num,
    },
}
UNIT_FIELDS = ("T", "eta", "eta_a", "eta_b", "eta_e", "eta_i")


# ------------------------------------------------------------- config

class Config:
    """Parsed config plus the raw text for line lookups."""

    def __init__(self, data, text, path="<string>"):
        self.data = data
        self.text = text
        self.path = str(path)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        return cls(parse_toml(text, str(path)), text, path)

    def line_of(self, key):
        """First line assigning ``key`` (last dotted component), if any."""
        name = re.escape(key.split(".")[-1])
        for i, line in enumerate(self.text.splitlines(), 1):
            if re.match(rf"\s*{name}\s*=", line):
                return i
        return None

    def error(self, message, key):
        return ConfigError(message, field=key, line=self.line_of(key))

    def section(self, name):
        return self.data.get(name, {})

    def hash(self):
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canon.encode()).hexdigest()


def _check_section(cfg, name, table, prefix):
    schema = SCHEMA[name]
    for key, value in table.items():
        path = f"{prefix}.{key}"
        if key in UNITLESS_REJECT:
            raise cfg.error(f"'{key}' has no unit suffix; use '{UNITLESS_REJECT[key]}'", path)
        if key not in schema:
            raise cfg.error(f"unknown key '{key}' in [{prefix}]", path)
        want = schema[key]
        if isinstance(value, bool) or not isinstance(value, want):
            raise cfg.error(f"'{key}' has the wrong type ({type(value).__name__})", path)
        if key in UNIT_FIELDS and not 0 <= value <= 1:
            raise cfg.error(f"{path} = {value} must lie in [0, 1]", path)
        if key in ("nu", "samples", "points", "reference_nu") and value < 1:
            raise cfg.error(f"{path} must be >= 1", path)


def validate_config(cfg):
    """Schema and physics checks; returns the scenario name."""
    data = cfg.data
    scenario = data.get("scenario")
    if scenario not in SCENARIOS:
        raise cfg.error(f"scenario must be one of {', '.join(SCENARIOS)}, got {scenario!r}", "scenario")
    allowed_top = {"scenario", "seed", "transduce", "lsp", "bounds", "mc", "compare"}
    for key in data:
        if key not in allowed_top:
            if key in UNITLESS_REJECT:
                raise cfg.error(f"'{key}' has no unit suffix; use '{UNITLESS_REJECT[key]}'", key)
            raise cfg.error(f"unknown top-level key '{key}'", key)
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise cfg.error("seed must be a non-negative integer", "seed")
    for name in ("transduce", "lsp", "bounds", "mc"):
        if name in data:
            _check_section(cfg, name, data[name], name)
    for i, exp in enumerate(data.get("compare", {}).get("experiment", [])):
        _check_section(cfg, "experiment", exp, f"compare.experiment[{i}]")
    # build the physical objects so physics violations surface here
    if scenario in ("reflectance-sweep", "sensitivity"):
        build_stack(cfg)
    elif scenario == "lsp":
        _lsp_inputs(cfg)
    elif scenario == "bounds":
        _bound_rows(cfg, dry=True)
    elif scenario in ("montecarlo", "compare"):
        _experiments(cfg, seed)
    return scenario


# ------------------------------------------------------------ builders

def _materials(cfg, section):
    path = cfg.section(section).get("materials_file")
    if path is not None:
        path = Path(cfg.path).parent / path if not os.path.isabs(path) else Path(path)
    try:
        return transduce.default_materials(path)
    except FileNotFoundError as exc:
        raise cfg.error(f"materials file not found: {exc.filename}", f"{section}.materials_file") from exc


def build_stack(cfg):
    t = cfg.section("transduce")
    if not t:
        raise cfg.error("missing [transduce] section", "transduce")
    mats = _materials(cfg, "transduce")
    if "prism_index" in t:
        prism = transduce.Dielectric.from_index(float(t["prism_index"]))
    else:
        name = t.get("prism", "bk7")
        if not isinstance(mats.get(name), transduce.Dielectric):
            raise cfg.error(f"unknown prism material '{name}'", "transduce.prism")
        prism = mats[name]
    if "metal_eps_real" in t:
        metal = complex(t["metal_eps_real"], t.get("metal_eps_imag", 0.0))
    else:
        name = t.get("metal", "gold")
        if not isinstance(mats.get(name), transduce.MaterialModel):
            raise cfg.error(f"unknown metal '{name}'", "transduce.metal")
        metal = mats[name]
    for key in ("metal_thickness_nm", "analyte_index"):
        if key not in t:
            raise cfg.error(f"missing required key '{key}'", f"transduce.{key}")
    lam = float(t.get("wavelength_nm", 632.8))
    try:
        return transduce.LayerStack(prism, metal, float(t["metal_thickness_nm"]),
                                    float(t["analyte_index"]) ** 2, reference_wavelength_nm=lam)
    except DomainError as exc:
        key = "transduce.analyte_index" if "denser" in str(exc) else "transduce"
        raise cfg.error(f"Kretschmann geometry constraint violated: {exc}", key) from exc


def _linspace(section, lo_key, hi_key, default_points, cfg, name):
    s = cfg.section(name)
    if lo_key not in s or hi_key not in s:
        return None
    lo, hi = float(s[lo_key]), float(s[hi_key])
    if not hi > lo:
        raise cfg.error(f"{hi_key} must exceed {lo_key}", f"{name}.{hi_key}")
    return np.linspace(lo, hi, int(s.get("points", default_points)))


def _lsp_inputs(cfg):
    s = cfg.section("lsp")
    mats = _materials(cfg, "lsp")
    metal = mats.get(s.get("metal", "gold"))
    if not isinstance(metal, transduce.MaterialModel):
        raise cfg.error(f"unknown metal '{s.get('metal')}'", "lsp.metal")
    n_d = float(s.get("medium_index", 1.33))
    radius = float(s.get("radius_nm", 20.0))
    if n_d < 1 or radius <= 0:
        raise cfg.error("need medium_index >= 1 and radius_nm > 0", "lsp")
    lam = _linspace(s, "wavelength_min_nm", "wavelength_max_nm", 401, cfg, "lsp")
    if lam is None:
        lam = np.linspace(400.0, 800.0, int(s.get("points", 401)))
    return metal, n_d, radius, lam


def _bound_rows(cfg, dry=False):
    s = dict(cfg.section("bounds"))
    nu = s.pop("nu", 1)
    entries = s.pop("entries", None)
    if "delta_phi_rad" in s:
        s["delta_phi"] = s.pop("delta_phi_rad")
    names = entries or estimate.catalog_entries()
    rows = []
    for name in names:
        if name not in estimate.CATALOG:
            raise cfg.error(f"unknown bound '{name}'; entries: {', '.join(estimate.catalog_entries())}",
                            "bounds.entries")
        need = set(estimate.catalog_params(name))
        if name == "sm_squeezed_phase" and "N" not in s and "r" in s:
            need = {"r"}
        if not need <= set(s):
            if entries:
                missing = sorted(need - set(s))
                raise cfg.error(f"bound '{name}' needs {', '.join(missing)}", "bounds")
            continue
        try:
            res = estimate.bound_catalog(name, dict(s), nu=nu)
        except DomainError as exc:
            raise cfg.error(str(exc), "bounds") from exc
        rows.append([name, res.value, res.nu])
    if not rows and not dry:
        raise cfg.error("no catalog entry has all its parameters", "bounds")
    return rows


def _experiment(cfg, spec, seed, stream, prefix, defaults):
    merged = dict(defaults, **spec)
    kind = merged.get("kind", "transmittance")
    stack = None
    if kind == "refractive_index" or ("T" not in merged and kind != "difference"):
        stack = build_stack(cfg)
    try:
        return mc.ExperimentConfig(
            probe=merged.get("probe", "coherent"), N=float(merged.get("N", 100.0)), kind=kind,
            T=merged.get("T"), eta=float(merged.get("eta", 1.0)),
            eta_a=float(merged.get("eta_a", 1.0)), eta_b=float(merged.get("eta_b", 1.0)),
            stack=stack, theta_deg=merged.get("theta_deg"),
            wavelength_nm=float(cfg.section("transduce").get("wavelength_nm", 632.8)),
            nu=int(merged.get("nu", 1)), reference_nu=merged.get("reference_nu"),
            samples=int(merged.get("samples", 1000)), seed=seed, stream=stream,
            label=merged.get("label", ""))
    except ConfigError as exc:
        raise cfg.error(str(exc).split(" (field")[0], f"{prefix}.{exc.field}" if exc.field else prefix) from exc


def _experiments(cfg, seed):
    if cfg.data["scenario"] == "montecarlo":
        s = dict(cfg.section("mc"))
        probes = s.pop("probes", ["coherent", "fock"])
        out = []
        for k, probe in enumerate(probes):
            out.append(_experiment(cfg, {"probe": probe, "label": probe}, seed, k, "mc", s))
        return out
    exps = cfg.section("compare").get("experiment", [])
    if not exps:
        raise cfg.error("compare needs at least one [[compare.experiment]]", "compare")
    return [_experiment(cfg, e, seed, k, f"compare.experiment[{k}]", {}) for k, e in enumerate(exps)]


# ------------------------------------------------------------ scenarios

def _scenario_reflectance(cfg, seed):
    stack = build_stack(cfg)
    t = cfg.section("transduce")
    lam = float(t.get("wavelength_nm", 632.8))
    theta = np.linspace(float(t.get("theta_min_deg", 40.0)), float(t.get("theta_max_deg", 80.0)),
                        int(t.get("points", 2000)))
    _, R = transduce.kretschmann_reflectance(theta, lam, stack)
    return ["theta_deg", "R"], [[a, b] for a, b in zip(theta, R)]


def _scenario_sensitivity(cfg, seed):
    stack = build_stack(cfg)
    t = cfg.section("transduce")
    lams = _linspace(t, "wavelength_min_nm", "wavelength_max_nm", 6, cfg, "transduce")
    single = lams is None
    if single:
        lams = [float(t.get("wavelength_nm", 632.8))]
    cols = ["wavelength_nm", "analyte_index", "eps_real", "eps_imag", "theta_res_deg",
            "theta_closed_form_deg", "angular_deg_per_riu", "spectral_nm_per_riu", "status"]
    rows = []
    for lam in lams:
        lam = float(lam)
        eps = complex(stack.metal_permittivity(lam))
        n_p = float(stack.prism_permittivity.index(lam))
        n_a = float(stack.analyte_permittivity.index(lam))
        row = [lam, n_a, eps.real, eps.imag, math.nan, math.nan, math.nan, math.nan, "ok"]
        steps = [
            (4, "find_resonance", lambda: transduce.find_resonance(stack, wavelength_nm=lam).location),
            (5, "resonance_angle", lambda: transduce.resonance_angle(n_p, n_a, eps.real)),
            (6, "angular_sensitivity", lambda: transduce.stack_sensitivity("angular", stack, lam)),
            (7, "spectral_sensitivity", lambda: transduce.stack_sensitivity("spectral", stack, lam)),
        ]
        for col, op, fn in steps:
            try:
                row[col] = fn()
            except (NumericalError, DomainError) as exc:
                if single:
                    if isinstance(exc, NumericalError):
                        raise
                    raise NumericalError(f"{exc} at {lam:g} nm", op) from exc
                row[8] = f"{op}: {type(exc).__name__}"
                break
        rows.append(row)
    return cols, rows


def _scenario_lsp(cfg, seed):
    metal, n_d, radius, lam = _lsp_inputs(cfg)
    eps_d = n_d ** 2
    volume = 4 / 3 * math.pi * (radius * transduce.NM) ** 3
    omega = transduce.omega_from_wavelength(lam)
    eps = metal.permittivity(lam)
    sca, ab = transduce.lsp_cross_sections(omega, eps_d, metal, volume)
    cols = ["wavelength_nm", "eps_real", "eps_imag", "sigma_sca_m2", "sigma_abs_m2"]
    return cols, [list(r) for r in zip(lam, eps.real, eps.imag, sca, ab)]


def _scenario_bounds(cfg, seed):
    return ["name", "value", "nu"], _bound_rows(cfg)


def _scenario_compare(cfg, seed):
    rows = mc.compare_strategies(_experiments(cfg, seed))
    return list(mc.COMPARE_FIELDS), [[r[k] for k in mc.COMPARE_FIELDS] for r in rows]


SCENARIO_FUNCS = {
    "reflectance-sweep": _scenario_reflectance,
    "sensitivity": _scenario_sensitivity,
    "lsp": _scenario_lsp,
    "bounds": _scenario_bounds,
    "montecarlo": _scenario_compare,
    "compare": _scenario_compare,
}


def execute(cfg, seed):
    scenario = validate_config(cfg)
    return SCENARIO_FUNCS[scenario](cfg, seed)


# ------------------------------------------------------------- output

def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _json_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


def render(columns, rows, fmt):
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(v) for v in r])
        return buf.getvalue()
    payload = {"columns": list(columns), "rows": [[_json_cell(v) for v in r] for r in rows]}
    return json.dumps(payload, indent=1, allow_nan=False) + "\n"


def read_table(path):
    """Parse a CSV written by this tool back into (columns, rows of floats/str)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        cols = next(reader)
        rows = []
        for r in reader:
            parsed = []
            for v in r:
                try:
                    parsed.append(float(v))
                except ValueError:
                    parsed.append(v)
            rows.append(parsed)
    return cols, rows


def write_atomic(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(out_dir, stem, columns, rows, fmt, cfg, seed, extra=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"{stem}.{fmt}"
    write_atomic(target, render(columns, rows, fmt))
    meta = {"tool": "qplasm", "version": __version__, "scenario": cfg.data.get("scenario"),
            "seed": seed, "config_sha256": cfg.hash(), "format": fmt, "rows": len(rows),
            "output": target.name}
    meta.update(extra or {})
    write_atomic(out / f"{stem}.meta.json", json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return target


# ------------------------------------------------------------- commands

def _resolve_seed(cfg, override):
    return int(override) if override is not None else int(cfg.data.get("seed", 0))


def cmd_run(args):
    cfg = Config.load(args.config)
    seed = _resolve_seed(cfg, args.seed)
    cols, rows = execute(cfg, seed)
    target = _emit(args.out, Path(args.config).stem, cols, rows, args.format, cfg, seed)
    log.info("wrote %d rows to %s", len(rows), target)
    return 0


def cmd_validate(args):
    cfg = Config.load(args.config)
    scenario = validate_config(cfg)
    log.info("%s: valid %s config", args.config, scenario)
    return 0


def _set_param(data, name):
    """Locate ``name`` (dotted or unique bare key) in the config tables."""
    if "." in name:
        sec, key = name.split(".", 1)
        if isinstance(data.get(sec), dict) and key in data[sec]:
            return sec, key
        if isinstance(data.get(sec), dict) and key in SCHEMA.get(sec, {}):
            return sec, key
        return None
    hits = [(s, name) for s, t in data.items() if isinstance(t, dict) and name in t]
    return hits[0] if len(hits) == 1 else None


def cmd_sweep(args):
    cfg = Config.load(args.config)
    base_seed = _resolve_seed(cfg, args.seed)
    validate_config(cfg)
    loc = _set_param(cfg.data, args.param)
    if loc is None:
        raise ConfigError(f"unknown or ambiguous sweep parameter '{args.param}'", field=args.param)
    if args.points < 2:
        raise ConfigError("--points must be >= 2", field="points")
    sec, key = loc
    values = np.linspace(args.start, args.stop, args.points)
    seeds = np.random.SeedSequence(base_seed).generate_state(args.points, dtype=np.uint32)
    columns, rows = None, []
    for i, v in enumerate(values):
        data = copy.deepcopy(cfg.data)
        data[sec][key] = float(v)
        point = Config(data, cfg.text, cfg.path)
        seed = int(seeds[i])
        if "seed" in data:
            data["seed"] = seed
        cols, part = execute(point, seed)
        columns = [f"{sec}.{key}"] + cols
        rows += [[float(v)] + r for r in part]
    stem = f"sweep_{Path(args.config).stem}"
    _emit(args.out, stem, columns, rows, args.format, cfg, base_seed,
          {"sweep": {"param": f"{sec}.{key}", "from": args.start, "to": args.stop, "points": args.points}})
    log.info("wrote %d rows", len(rows))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="qplasm", description="Plasmonic transduction and quantum estimation toolkit.")
    p.add_argument("--version", action="version", version=f"qplasm {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, outputs=True):
        sp.add_argument("--config", required=True, help="TOML scenario config")
        sp.add_argument("--quiet", action="store_true", help="only report errors")
        if outputs:
            sp.add_argument("--out", default="results", help="output directory")
            sp.add_argument("--format", choices=("csv", "json"), default="csv")
            sp.add_argument("--seed", type=int, default=None, help="override the config seed")

    common(sub.add_parser("run", help="execute a scenario"))
    common(sub.add_parser("validate", help="check a config without running it"), outputs=False)
    sw = sub.add_parser("sweep", help="run a scenario over a linear parameter grid")
    common(sw)
    sw.add_argument("--param", required=True, help="config key, e.g. transduce.analyte_index")
    sw.add_argument("--from", dest="start", type=float, required=True)
    sw.add_argument("--to", dest="stop", type=float, required=True)
    sw.add_argument("--points", type=int, required=True)
    return p


COMMANDS = {"run": cmd_run, "validate": cmd_validate, "sweep": cmd_sweep}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DomainError, CatalogError, ModelError) as exc:
        log.error("config error: %s", exc)
        return 2
    except (NumericalError, ResourceError) as exc:
        log.error("numerical failure: %s", exc)
        return 3
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
