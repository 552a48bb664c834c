"""Config-driven command-line front end.

Subcommands: ``estimate``, ``verify``, ``simulate``, ``ratio-curve``,
``decompose``.  Each takes a plain-text config file with ``[section]``
headers and ``key = value`` lines; unknown sections or keys are rejected, and
a seed is mandatory for any randomized run.  Outputs are written atomically
(temp file + rename) so re-running a config overwrites rather than appends,
and a fixed seed reproduces every output byte for byte.

Exit codes: 0 success, 2 configuration or input error, 3 estimation error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from cvlab import analysis, combinatorics, estimators, simlab
from cvlab.core import DomainError, read_dataset_csv
from cvlab.estimators import (
    EstimationError,
    EstimatorConfig,
    Metric,
    Variant,
    Version,
)
from cvlab.resampling import SamplingModel, derive_seed


@dataclass(frozen=True)
class RunConfig:
    """A parsed config: subcommand plus canonical (section, key, value) text."""

    subcommand: str
    sections: tuple[tuple[str, tuple[tuple[str, str], ...]], ...]

    def get(self, section: str, key: str, default: str | None = None) -> str | None:
        for name, items in self.sections:
            if name == section:
                for k, v in items:
                    if k == key:
                        return v
        return default

    def section(self, name: str) -> dict[str, str]:
        for sec, items in self.sections:
            if sec == name:
                return dict(items)
        return {}

    def render(self) -> str:
        lines = []
        for name, items in self.sections:
            lines.append(f"[{name}]")
            for k, v in items:
                lines.append(f"{k} = {v}")
            lines.append("")
        return "\n".join(lines)


def parse_config_text(text: str, subcommand: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise DomainError(f"config parse error: {exc}") from exc
    sections = tuple(
        (name, tuple((k, v.strip()) for k, v in parser.items(name)))
        for name in parser.sections()
    )
    return RunConfig(subcommand=subcommand, sections=sections)


def load_config(path: str | Path, subcommand: str) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DomainError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, subcommand)


# ---------------------------------------------------------------------------
# Config schemas
# ---------------------------------------------------------------------------

_BOOLS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _to_bool(raw: str) -> bool:
    try:
        return _BOOLS[raw.lower()]
    except KeyError:
        raise DomainError(f"expected a boolean, got '{raw}'") from None


def _to_int_list(raw: str) -> list[int]:
    try:
        return [int(tok) for tok in raw.replace(",", " ").split()]
    except ValueError:
        raise DomainError(f"expected a list of integers, got '{raw}'") from None


_CONVERTERS: dict[str, Callable[[str], object]] = {
    "int": int,
    "float": float,
    "str": str,
    "bool": _to_bool,
    "int_list": _to_int_list,
    "version": lambda raw: Version(raw.upper()),
    "variant": lambda raw: Variant(raw.lower()),
    "metric": lambda raw: Metric(raw.lower()),
    "sampling": lambda raw: SamplingModel(raw.lower()),
}

# {section: {key: type name}}; every listed key is optional unless the
# subcommand handler demands it.
_SCHEMAS: dict[str, dict[str, dict[str, str]]] = {
    "estimate": {
        "estimator": {
            "version": "version", "variant": "variant", "metric": "metric",
            "th": "float", "K": "int", "K1": "int", "K2": "int", "M": "int",
            "B": "int", "sampling": "sampling", "seed": "int", "strict": "bool",
        },
        "trainer": {"id": "str", "ridge": "float"},
        "io": {"dataset": "str", "out_json": "str", "out_csv": "str"},
        "run": {"threads": "int"},
    },
    "verify": {
        "verify": {"n_max": "int"},
        "run": {"threads": "int"},
    },
    "simulate": {
        "data": {"p": "int", "delta": "float", "n1": "int", "n2": "int"},
        "campaign": {"trials": "int", "test_per_class": "int", "seed": "int"},
        "estimator": {
            "version": "version", "variant": "variant", "metric": "metric",
            "th": "float", "K": "int", "K1": "int", "K2": "int", "M": "int",
            "B": "int", "sampling": "sampling", "strict": "bool",
        },
        "trainer": {"id": "str", "ridge": "float"},
        "io": {"out_table": "str", "out_triples": "str", "out_manifest": "str"},
        "run": {"threads": "int"},
    },
    "ratio-curve": {
        "curve": {
            "n1_grid": "int_list", "B": "int", "sampling": "sampling",
            "replicates": "int", "seed": "int",
        },
        "trainer": {"id": "str", "ridge": "float"},
        "io": {"out_csv": "str"},
        "run": {"threads": "int"},
    },
    "decompose": {
        "io": {"input": "str", "out_json": "str", "out_csv": "str"},
        "run": {"threads": "int"},
    },
}


def validate_config(config: RunConfig) -> dict[str, dict[str, object]]:
    """Reject unknown sections/keys and convert values per the schema."""
    schema = _SCHEMAS[config.subcommand]
    out: dict[str, dict[str, object]] = {}
    for section, items in config.sections:
        if section not in schema:
            raise DomainError(f"unknown config section [{section}]")
        out[section] = {}
        for key, raw in items:
            if key not in schema[section]:
                raise DomainError(f"unknown key '{key}' in section [{section}]")
            converter = _CONVERTERS[schema[section][key]]
            try:
                out[section][key] = converter(raw)
            except (ValueError, KeyError) as exc:
                raise DomainError(f"[{section}] {key}: bad value '{raw}' ({exc})") from None
    if "run" in out and out["run"].get("threads", 1) < 1:
        raise DomainError("[run] threads must be >= 1")
    return out


def _require(values: dict, section: str, key: str):
    try:
        return values[section][key]
    except KeyError:
        raise DomainError(f"missing required key '{key}' in section [{section}]") from None


def _estimator_config(values: dict, seed_required: bool) -> EstimatorConfig:
    est = values.get("estimator", {})
    version = est.get("version")
    metric = est.get("metric")
    if version is None or metric is None:
        raise DomainError("[estimator] needs 'version' and 'metric'")
    seed = est.get("seed")
    if seed_required and version in (Version.CVKR, Version.CVKM, Version.LOOB) and seed is None:
        raise DomainError(f"[estimator] seed is mandatory for randomized version {version.value}")
    return EstimatorConfig(
        version=version,
        metric=metric,
        variant=est.get("variant", Variant.POOLED),
        th=est.get("th", 0.0),
        n_folds=est.get("K"),
        n_folds1=est.get("K1"),
        n_folds2=est.get("K2"),
        repetitions=est.get("M"),
        n_bootstrap=est.get("B"),
        sampling=est.get("sampling", SamplingModel.ORDERED),
        seed=seed,
        strict=est.get("strict", False),
    )


def _trainer(values: dict) -> simlab.Trainer:
    section = values.get("trainer", {})
    trainer_id = section.get("id")
    if trainer_id is None:
        raise DomainError("[trainer] needs 'id'")
    params = {k: v for k, v in section.items() if k != "id"}
    return simlab.trainer_from_id(trainer_id, params)


# ---------------------------------------------------------------------------
# Atomic output helpers
# ---------------------------------------------------------------------------


def _atomic_write(path: str | Path, data: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_text(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def cmd_estimate(config: RunConfig) -> int:
    values = validate_config(config)
    est_cfg = _estimator_config(values, seed_required=True)
    trainer = _trainer(values)
    dataset_path = _require(values, "io", "dataset")
    dataset = read_dataset_csv(dataset_path)
    report = estimators.run(dataset, trainer, est_cfg)
    payload = report.to_json_dict()
    out_json = values.get("io", {}).get("out_json")
    if out_json:
        _atomic_write(out_json, _json_text(payload))
    out_csv = values.get("io", {}).get("out_csv")
    if out_csv:
        keys, row = report.csv_fields()
        _atomic_write(out_csv, _csv_text(keys, [row]))
    print(f"{report.version.value}/{report.variant.value} {report.metric.value} "
          f"= {report.value!r} (excluded={report.excluded_count})")
    return 0


def run_verify(
    n_max: int,
    pmf: Callable[[int, int, int], Fraction] | None = None,
    out: Callable[[str], None] = print,
) -> bool:
    """PASS/FAIL line per identity per n; ``pmf`` is a test hook."""
    if n_max < 2:
        raise DomainError("n_max must be >= 2")
    kwargs = {} if pmf is None else {"pmf": pmf}
    all_ok = True
    for n in range(2, n_max + 1):
        for name, ok in combinatorics.identity_checks(n, **kwargs):
            all_ok &= ok
            out(f"{'PASS' if ok else 'FAIL'} n={n} {name}")
    out(f"{'PASS' if all_ok else 'FAIL'} overall (n_max={n_max})")
    return all_ok


def cmd_verify(config: RunConfig) -> int:
    values = validate_config(config)
    n_max = _require(values, "verify", "n_max")
    return 0 if run_verify(n_max) else 1


def _campaign_from_config(values: dict) -> simlab.WeakCorrConfig:
    spec = simlab.MultinormalSpec(
        p=_require(values, "data", "p"),
        delta=_require(values, "data", "delta"),
        n1=_require(values, "data", "n1"),
        n2=_require(values, "data", "n2"),
    )
    if "estimator" in values and values["estimator"]:
        est_cfg = _estimator_config(values, seed_required=False)
    else:
        est_cfg = simlab.DEFAULT_ESTIMATOR
    return simlab.WeakCorrConfig(
        spec=spec,
        trials=_require(values, "campaign", "trials"),
        test_per_class=_require(values, "campaign", "test_per_class"),
        trainer=_trainer(values),
        estimator=est_cfg,
        seed=_require(values, "campaign", "seed"),
    )


TABLE_COLUMNS = ["role", "mean", "sigma", "rms_cond", "rms_mean", "rho", "n"]


def table_csv_text(result: simlab.WeakCorrResult) -> str:
    rows = [
        [r.role, r.mean, r.sigma, r.rms_cond, r.rms_mean, r.rho, r.n]
        for r in result.rows
    ]
    return _csv_text(TABLE_COLUMNS, rows)


def triples_csv_text(result: simlab.WeakCorrResult) -> str:
    rows = [
        [t, row[0], row[1], row[2]] for t, row in enumerate(result.triples)
    ]
    return _csv_text(["trial", "S", "Sbar", "Shat"], rows)


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def manifest_text(config: RunConfig, outputs: dict[str, str]) -> str:
    lines = [config.render().rstrip("\n"), "", "[outputs]"]
    for name, digest in sorted(outputs.items()):
        lines.append(f"{name} = {digest}")
    lines.append("")
    return "\n".join(lines)


def parse_manifest(path: str | Path, subcommand: str) -> RunConfig:
    """Re-parse the config echoed in a manifest (the [outputs] section is
    stripped), for round-trip checks."""
    config = load_config(path, subcommand)
    sections = tuple((s, items) for s, items in config.sections if s != "outputs")
    return RunConfig(subcommand=subcommand, sections=sections)


def cmd_simulate(config: RunConfig) -> int:
    values = validate_config(config)
    campaign = _campaign_from_config(values)
    result = simlab.run_weak_correlation(campaign)
    table = table_csv_text(result)
    triples = triples_csv_text(result)
    out_table = _require(values, "io", "out_table")
    out_triples = _require(values, "io", "out_triples")
    out_manifest = _require(values, "io", "out_manifest")
    _atomic_write(out_table, table)
    _atomic_write(out_triples, triples)
    _atomic_write(
        out_manifest,
        manifest_text(
            config, {"table_sha256": _sha256(table), "triples_sha256": _sha256(triples)}
        ),
    )
    for row in result.rows:
        print(
            f"{row.role}: mean={row.mean:.4f} sigma={row.sigma:.4f} "
            f"rms_cond={row.rms_cond:.4f} rms_mean={row.rms_mean:.4f} rho={row.rho:.4f}"
        )
    print(f"aborted trials: {result.aborted}")
    return 0


RATIO_COLUMNS = ["n1", "ratio_empirical", "ratio_theory", "model"]


def ratio_csv_text(points: list[simlab.RatioPoint]) -> str:
    rows = [
        [p.n1, p.ratio_empirical, p.ratio_theory, p.model.value] for p in points
    ]
    return _csv_text(RATIO_COLUMNS, rows)


def cmd_ratio_curve(config: RunConfig) -> int:
    values = validate_config(config)
    curve = values.get("curve", {})
    grid = _require(values, "curve", "n1_grid")
    n_bootstrap = _require(values, "curve", "B")
    replicates = _require(values, "curve", "replicates")
    master = _require(values, "curve", "seed")
    model = curve.get("sampling", SamplingModel.ORDERED)
    seeds = [derive_seed(master, "ratio-replicate", r) for r in range(replicates)]
    points = simlab.run_ratio_curve(grid, _trainer(values), n_bootstrap, model, seeds)
    _atomic_write(_require(values, "io", "out_csv"), ratio_csv_text(points))
    for p in points:
        print(
            f"n1={p.n1}: empirical={p.ratio_empirical:.4f} theory={p.ratio_theory:.4f}"
        )
    return 0


def cmd_decompose(config: RunConfig) -> int:
    values = validate_config(config)
    input_path = Path(_require(values, "io", "input"))
    try:
        with input_path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["s", "s_hat"]:
                raise DomainError(f"{input_path}: expected header 's,s_hat'")
            pairs = [(float(row[0]), float(row[1])) for row in reader if row]
    except OSError as exc:
        raise DomainError(f"cannot read {input_path}: {exc}") from exc
    except ValueError as exc:
        raise DomainError(f"{input_path}: {exc}") from exc
    sample = analysis.PairedPerformanceSample(
        s=np.array([p[0] for p in pairs]), s_hat=np.array([p[1] for p in pairs])
    )
    report = analysis.decompose(sample)
    payload = report.to_json_dict()
    out_json = values.get("io", {}).get("out_json")
    if out_json:
        _atomic_write(out_json, _json_text(payload))
    out_csv = values.get("io", {}).get("out_csv")
    if out_csv:
        keys = list(payload.keys())
        _atomic_write(out_csv, _csv_text(keys, [[payload[k] for k in keys]]))
    print(
        f"rms_cond={report.rms_cond!r} rms_mean={report.rms_mean!r} "
        f"rho={report.rho!r} residual={report.residual!r}"
    )
    return 0


_HANDLERS = {
    "estimate": cmd_estimate,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "ratio-curve": cmd_ratio_curve,
    "decompose": cmd_decompose,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvlab",
        description="Resampling estimator laboratory: estimators, exact "
        "identities, and Monte-Carlo campaigns.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _HANDLERS:
        p = sub.add_parser(name)
        p.add_argument("config", help="path to an INI-style config file")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, args.subcommand)
        return _HANDLERS[args.subcommand](config)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EstimationError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
