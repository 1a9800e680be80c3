"""ap-lab: run or sweep verification checks from TOML configs.

Config layout::

    [experiment]
    name = "l3count"
    seed = 0                 # optional, passed to checks that take a seed

    [[check]]
    name = "l3count"         # key in aplab.verify.REGISTRY
    [check.params]
    n_members = 1000
    N = 512
    [check.measure]          # optional: built and passed as the measure argument
    kind = "self_similar"
    base = 3
    digits = [0, 2]
    weights = [0.5, 0.5]

    [tolerances]             # optional overrides of aplab.verify.TOLERANCES
    polar_l1 = 0.05

Exit codes: 0 all pass, 2 some inconclusive, 1 some fail, 64 bad config.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import inspect
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__, verify
from .constructions import SelfSimilarMeasure
from .fractal_spectral import GaussianMixture, PowerLawSpectrum
from .group_fourier import GridDensity

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_CONFIG = 0, 1, 2, 64

# measure-valued argument name per check
MEASURE_ARG = {
    "mass_telescoping": "mu",
    "polar_consistency": "source",
    "frostman_fit": "f",
    "pointwise_decay": "mu",
    "fractal_corollary": "mu",
}

# headline metric per check, used by sweeps
PRIMARY_METRIC = {
    "oracle_equivalence": "worst_relative_gap",
    "l3count": "max_c",
    "gowers_threshold": "max_fourth_moment_ratio",
    "behrend_gowers": "fourth_moment",
    "behrend": "trend_ratio",
    "bohr_cut_contract": "spread_h",
    "mass_telescoping": "a_n",
    "polar_consistency": "gap",
    "frostman_fit": "s_hat",
    "pointwise_decay": "decay_exponent",
    "fractal_corollary": "q1",
    "c2_envelope": "c2",
}

# sweep axes that map onto a different parameter
AXIS_ALIASES = {
    ("mass_telescoping", "n"): lambda v: {"n_range": [int(v)]},
    ("c2_envelope", "delta"): lambda v: {"t": float(v)},
}


class ConfigError(ValueError):
    """Malformed experiment configuration."""


# ------------------------------------------------------------------ config


def load_config(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    validate_config(cfg, str(path))
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _checks(cfg: dict) -> list[dict]:
    checks = cfg.get("check", [])
    return checks if isinstance(checks, list) else [checks]


def validate_config(cfg: dict, where: str = "config") -> None:
    unknown = set(cfg) - {"experiment", "check", "tolerances"}
    if unknown:
        raise ConfigError(f"{where}: unknown top-level key(s) {sorted(unknown)}")
    exp = cfg.get("experiment")
    if not isinstance(exp, dict) or not isinstance(exp.get("name"), str):
        raise ConfigError(f"{where}: [experiment] table with a string 'name' is required")
    checks = _checks(cfg)
    if not checks:
        raise ConfigError(f"{where}: at least one [[check]] table is required")
    for i, chk in enumerate(checks):
        label = f"{where}: check[{i}]"
        name = chk.get("name")
        if name not in verify.REGISTRY:
            raise ConfigError(f"{label}.name: unknown check {name!r}; see `ap-lab run --list`")
        extra = set(chk) - {"name", "params", "measure"}
        if extra:
            raise ConfigError(f"{label}: unknown key(s) {sorted(extra)}")
        sig = inspect.signature(verify.REGISTRY[name].__wrapped__)
        params = chk.get("params", {})
        bad = set(params) - set(sig.parameters)
        if bad:
            raise ConfigError(f"{label}.params: unknown parameter(s) {sorted(bad)} for {name}")
        _validate_grid(label, name, params)
        if "measure" in chk:
            if name not in MEASURE_ARG:
                raise ConfigError(f"{label}.measure: check {name} takes no measure")
            build_measure(chk["measure"], label + ".measure")
        elif name in MEASURE_ARG:
            raise ConfigError(f"{label}: check {name} needs a [check.measure] table")
    tol = cfg.get("tolerances", {})
    bad = set(tol) - set(verify.TOLERANCES)
    if bad:
        raise ConfigError(f"{where}: [tolerances] unknown key(s) {sorted(bad)}")


def _validate_grid(label: str, name: str, params: dict) -> None:
    N = params.get("N")
    if N is None:
        return
    if not isinstance(N, int) or N < 3:
        raise ConfigError(f"{label}.params.N: must be an integer >= 3, got {N!r}")
    if name == "mass_telescoping":
        n_max = max(params.get("n_range", [3, 8])) + 1
        if N / 2 < 2**n_max:
            raise ConfigError(
                f"{label}.params.N: Nyquist constraint N/2 >= 2^(n_max+1) violated "
                f"(N={N}, needs N >= {2 ** (n_max + 1)})"
            )


def build_measure(spec: dict, label: str = "measure"):
    """Measure or density from its config table."""
    kind = spec.get("kind")
    try:
        if kind == "self_similar":
            return SelfSimilarMeasure(int(spec["base"]), tuple(spec["digits"]), tuple(spec["weights"]), int(spec.get("d", 1)))
        if kind == "middle_thirds":
            return SelfSimilarMeasure.middle_thirds(int(spec.get("d", 1)))
        if kind == "lebesgue":
            return SelfSimilarMeasure.lebesgue(int(spec.get("base", 2)), int(spec.get("d", 1)))
        if kind == "power_law":
            return PowerLawSpectrum(float(spec["beta"]), float(spec.get("band", 16384.0)))
        if kind == "gaussian":
            return GaussianMixture(spec["centers"], spec["widths"], spec["weights"])
        if kind == "spike":
            return verify.SpikeMixture(float(spec.get("w", 0.5)), int(spec.get("d", 1)))
        if kind == "constant":
            return GridDensity.constant(int(spec["N"]), int(spec.get("d", 1)))
        if kind == "point_mass":
            return GridDensity.point_mass(int(spec["N"]), int(spec.get("d", 1)))
    except KeyError as exc:
        raise ConfigError(f"{label}: missing field {exc.args[0]!r} for kind {kind!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{label}: {exc}") from None
    raise ConfigError(f"{label}.kind: unknown measure kind {kind!r}")


# ------------------------------------------------------------------ running


def _call(chk: dict, seed: int | None):
    name = chk["name"]
    fn = verify.REGISTRY[name]
    kwargs = dict(chk.get("params", {}))
    if "n_range" in kwargs:
        kwargs["n_range"] = list(kwargs["n_range"])
    if seed is not None and "seed" in inspect.signature(fn.__wrapped__).parameters:
        kwargs["seed"] = seed
    if "measure" in chk:
        kwargs[MEASURE_ARG[name]] = build_measure(chk["measure"])
    return fn(**kwargs)


def run_checks(cfg: dict, seed: int | None = None, threads: int = 1) -> list[verify.VerificationReport]:
    """Run every check; results keep config order whatever the scheduling."""
    saved = dict(verify.TOLERANCES)
    verify.TOLERANCES.update(cfg.get("tolerances", {}))
    try:
        s = seed if seed is not None else cfg["experiment"].get("seed")
        checks = _checks(cfg)
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            return list(pool.map(lambda c: _call(c, s), checks))
    finally:
        verify.TOLERANCES.clear()
        verify.TOLERANCES.update(saved)


def exit_code(reports) -> int:
    verdicts = {r.verdict for r in reports}
    if verify.FAIL in verdicts:
        return EXIT_FAIL
    if verify.INCONCLUSIVE in verdicts:
        return EXIT_INCONCLUSIVE
    return EXIT_PASS


def _scalars(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, (bool, int, float, str)) or v is None:
            out[k] = v
    return out


def _header(fh, cfg_hash: str, what: str) -> None:
    fh.write(f"# {what} config_hash={cfg_hash} version={__version__}\n")


def write_check_csv(path: Path, report: verify.VerificationReport, cfg_hash: str) -> None:
    d = report.to_dict()
    with open(path, "w", newline="") as fh:
        _header(fh, cfg_hash, d["check_name"])
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["field", "value"])
        w.writerow(["verdict", d["verdict"]])
        w.writerow(["admissible", d["admissible"]])
        for section in ("measured", "fitted"):
            for k, v in sorted(d[section].items()):
                w.writerow([f"{section}.{k}", json.dumps(v)])


def _series(report: verify.VerificationReport):
    for k, v in report.to_dict()["measured"].items():
        if isinstance(v, list) and len(v) >= 2 and all(isinstance(x, (int, float)) for x in v):
            return k, np.asarray(v, dtype=np.float64)
    return None


def write_svg(path: Path, x, y, xlabel: str, ylabel: str, title: str, cfg_hash: str, fit: bool = True) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = cfg_hash
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    good = np.isfinite(y) & (y > 0)
    ax.plot(x[good], y[good], "o-", label=ylabel)
    if fit and good.sum() >= 2:
        k, b = np.polyfit(x[good], np.log2(y[good]), 1)
        ax.plot(x[good], 2 ** (k * x[good] + b), "--", label=f"slope {k:.3f} (log2)")
    ax.set_yscale("log", base=2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(f"{title} [{cfg_hash} v{__version__}]", fontsize=8)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": f"ap-lab {__version__}"})
    plt.close(fig)


def persist(reports, cfg: dict, out_dir: Path) -> list[Path]:
    """Single writer for all artifacts of one run."""
    out_dir.mkdir(parents=True, exist_ok=True)
    h = config_hash(cfg)
    name = cfg["experiment"]["name"]
    verify.write_reports(out_dir / "reports.jsonl", reports)
    written = [out_dir / "reports.jsonl"]
    for i, r in enumerate(reports):
        stem = f"{name}-{i}-{r.check_name}-{h}"
        p = out_dir / f"{stem}.csv"
        write_check_csv(p, r, h)
        written.append(p)
        s = _series(r)
        if s is not None:
            key, y = s
            p = out_dir / f"{stem}.svg"
            write_svg(p, np.arange(len(y)), y, "index", key, f"{name}: {r.check_name}", h)
            written.append(p)
    summary = out_dir / f"{name}-{h}-summary.md"
    summary.write_text(f"<!-- config_hash={h} version={__version__} -->\n" + verify.summary_markdown(reports))
    written.append(summary)
    return written


# -------------------------------------------------------------------- sweep


def _parse_values(text: str) -> list:
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if ".." in tok:
            a, b = tok.split("..")
            vals.extend(range(int(a), int(b) + 1))
            continue
        try:
            vals.append(int(tok))
        except ValueError:
            vals.append(float(tok))
    return vals


def _apply_axis(chk: dict, axis: str, value) -> dict:
    chk = copy.deepcopy(chk)
    alias = AXIS_ALIASES.get((chk["name"], axis))
    if alias is not None:
        chk.setdefault("params", {}).update(alias(value))
        return chk
    if axis.startswith("measure."):
        key = axis.split(".", 1)[1]
        if "measure" not in chk or key not in chk["measure"]:
            raise ConfigError(f"unknown sweep axis {axis!r}: the measure has no field {key!r}")
        chk["measure"][key] = value
        return chk
    sig = inspect.signature(verify.REGISTRY[chk["name"]].__wrapped__)
    if axis not in sig.parameters or axis == MEASURE_ARG.get(chk["name"]):
        raise ConfigError(f"unknown sweep axis {axis!r} for check {chk['name']}")
    chk.setdefault("params", {})[axis] = value
    return chk


def sweep(cfg: dict, axis: str, values: list, seed=None, threads: int = 1, out_dir: Path = Path("out")) -> list[Path]:
    if not values:
        raise ConfigError("sweep needs a nonempty --values list")
    base = _checks(cfg)[0]
    variants = [_apply_axis(base, axis, v) for v in values]
    for i, v in enumerate(variants):
        validate_config({**cfg, "check": [v]}, f"sweep value {values[i]!r}")
    run_cfg = {**cfg, "check": variants}
    reports = run_checks(run_cfg, seed, threads)
    out_dir.mkdir(parents=True, exist_ok=True)
    h = config_hash({**cfg, "sweep": {"axis": axis, "values": values}})
    name = cfg["experiment"]["name"]
    metric = PRIMARY_METRIC.get(base["name"])
    csv_path = out_dir / f"{name}-sweep-{axis}-{h}.csv"
    ys = []
    with open(csv_path, "w", newline="") as fh:
        _header(fh, h, f"sweep {name} axis={axis}")
        w = csv.writer(fh, lineterminator="\n")
        keys = sorted({k for r in reports for k in _scalars(r.to_dict()["measured"])})
        w.writerow([axis, "verdict", "primary"] + keys)
        for v, r in zip(values, reports):
            m = r.to_dict()["measured"]
            y = m.get(metric)
            if isinstance(y, list):
                y = y[0] if y else None
            ys.append(y if isinstance(y, (int, float)) else math.nan)
            w.writerow([v, r.verdict, json.dumps(y)] + [json.dumps(m.get(k)) for k in keys])
    svg_path = out_dir / f"{name}-sweep-{axis}-{h}.svg"
    write_svg(svg_path, values, ys, axis, metric or "metric", f"sweep {name}", h)
    verify.write_reports(out_dir / "reports.jsonl", reports)
    return [csv_path, svg_path, out_dir / "reports.jsonl"]


# --------------------------------------------------------------------- main


def _list_checks() -> str:
    rows = []
    for name, fn in sorted(verify.REGISTRY.items()):
        doc = (fn.__doc__ or "").strip().splitlines()[0] if fn.__doc__ else ""
        rows.append(f"{name:22s} {doc}")
    return "\n".join(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ap-lab", description="Seeded verification runs for 3AP counting experiments.")
    parser.add_argument("--version", action="version", version=f"ap-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="override the experiment seed")
        p.add_argument("--threads", type=int, default=1, help="worker pool size")
        p.add_argument("--out-dir", type=Path, default=Path("out"), help="artifact directory")

    run = sub.add_parser("run", help="run the checks of a config")
    run.add_argument("config", nargs="?")
    run.add_argument("--list", action="store_true", help="list available checks")
    common(run)

    sw = sub.add_parser("sweep", help="re-run the first check over a parameter axis")
    sw.add_argument("config")
    sw.add_argument("--axis", required=True)
    sw.add_argument("--values", required=True, help="comma list; a..b expands to integers")
    common(sw)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run" and args.list:
        print(_list_checks())
        return EXIT_PASS
    if args.command == "run" and not args.config:
        print("ap-lab run: a config path is required (or --list)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            reports = run_checks(cfg, args.seed, args.threads)
            persist(reports, cfg, args.out_dir)
            for r in reports:
                print(f"{r.check_name}: {r.verdict} (admissible={r.admissible}) {r.notes}".rstrip())
            return exit_code(reports)
        paths = sweep(cfg, args.axis, _parse_values(args.values), args.seed, args.threads, args.out_dir)
        for p in paths:
            print(p)
        return EXIT_PASS
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
