"""Command-line driver: ``seqpt tomograph|compare|convergence --config cfg.json``.

Every subcommand reads a JSON config, runs the library, and writes JSON or
CSV to ``--output`` (stdout if absent). Outputs contain no timestamps, so
identical configs and seeds give byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channels import Channel, builtin_channel, channel_from_json, channel_to_json, encode_matrix
from .designs import WITHOUT_REPLACEMENT, SamplingPlan, make_plan, mub_design
from .experiment import CONVERGENCE_COLUMNS, NoiseModel, channel_fidelity, convergence_report
from .qmath import n_qubits_of
from .tomography import (
    METHODS,
    SEQPT_ANCILLA,
    SEQPT_ANCILLA_FREE,
    STANDARD,
    ChiEstimate,
    per_state_estimates,
    resource_count,
    seqpt_element,
    seqpt_full,
    standard_qpt,
)

METHOD_ALIASES = {"seqpt": SEQPT_ANCILLA, "seqpt-ancilla": SEQPT_ANCILLA,
                  "seqpt-ancilla-free": SEQPT_ANCILLA_FREE, "standard": STANDARD}
DEFAULT_FIDELITY_SAMPLES = 2000


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


@dataclass
class ExperimentConfig:
    channel: Channel
    channel_doc: object
    methods: tuple
    elements: object  # "all" or list of (a, b) label pairs
    shots: int | None
    noise: NoiseModel | None
    n_qubits: int
    plan: SamplingPlan | None
    plan_doc: dict | None
    seed: int
    fidelity_samples: int

    def echo(self) -> dict:
        return {
            "channel": self.channel_doc,
            "method": list(self.methods),
            "elements": self.elements if self.elements == "all" else [list(p) for p in self.elements],
            "shots": "exact" if self.shots is None else self.shots,
            "noise": self.noise.to_dict() if self.noise else None,
            "design": {"type": "mub", "n_qubits": self.n_qubits},
            "plan": self.plan_doc,
            "seed": self.seed,
            "fidelity_samples": self.fidelity_samples,
        }


def load_channel_source(src, base_dir: Path = Path(".")) -> Channel:
    """A channel given inline, by builtin name, by file, or from a result bundle."""
    if isinstance(src, str):
        name, _, params = src.partition(":")
        return builtin_channel(name, [float(p) for p in params.split(",") if p])
    if not isinstance(src, dict):
        raise ValueError("channel must be a builtin name or an object")
    if "path" in src:
        return load_channel_source(json.loads((base_dir / src["path"]).read_text()), base_dir)
    if "bundle" in src:
        bundle = src["bundle"]
        if not isinstance(bundle, dict):
            bundle = json.loads((base_dir / bundle).read_text())
        return channel_from_bundle(bundle, src.get("method"))
    if "reconstruct" in src:
        cfg = parse_config(src["reconstruct"], base_dir)
        if len(cfg.methods) != 1 or cfg.elements != "all":
            raise ConfigError("reconstruct", "needs exactly one method and elements='all'")
        return run_method(cfg, cfg.methods[0]).channel()
    if "results" in src:
        return channel_from_bundle(src, None)
    return channel_from_json(src)


def channel_from_bundle(bundle: dict, method: str | None = None) -> Channel:
    results = bundle.get("results", {})
    if not results:
        raise ValueError("bundle has no results")
    if method is None:
        method = next(iter(results))
    method = METHOD_ALIASES.get(method, method)
    if method not in results or results[method].get("channel") is None:
        raise ValueError(f"bundle has no full chi estimate for method {method!r}")
    return channel_from_json(results[method]["channel"])


def _parse_shots(value):
    if value is None or value == "exact":
        return None
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError("shots", f"must be a positive integer or 'exact', got {value!r}")
    return value


def parse_config(doc: dict, base_dir: Path = Path(".")) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    if "channel" not in doc:
        raise ConfigError("channel", "missing")
    try:
        channel = load_channel_source(doc["channel"], base_dir)
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise ConfigError("channel", str(exc)) from None

    raw_method = doc.get("method", "seqpt")
    names = list(METHODS) if raw_method == "all" else (raw_method if isinstance(raw_method, list) else [raw_method])
    try:
        methods = tuple(dict.fromkeys(METHOD_ALIASES[m] for m in names))
    except (KeyError, TypeError):
        raise ConfigError("method", f"must be seqpt, seqpt-ancilla-free, standard or all, got {raw_method!r}") from None

    basis = channel.basis
    raw_elements = doc.get("elements", "all")
    if raw_elements == "all":
        elements = "all"
    else:
        try:
            elements = [tuple(basis.labels[basis.index(x)] for x in pair) for pair in raw_elements]
            if any(len(p) != 2 for p in elements):
                raise ValueError("each element is an [a, b] pair")
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ConfigError("elements", str(exc)) from None

    shots = _parse_shots(doc.get("shots", "exact"))

    noise_doc = doc.get("noise")
    try:
        noise = NoiseModel.from_dict(noise_doc) if noise_doc else None
    except (TypeError, ValueError) as exc:
        raise ConfigError("noise", str(exc)) from None

    design_doc = doc.get("design") or {"type": "mub", "n_qubits": n_qubits_of(channel.dim)}
    if design_doc.get("type", "mub") != "mub":
        raise ConfigError("design", "only 'mub' designs are supported")
    n_qubits = int(design_doc.get("n_qubits", n_qubits_of(channel.dim)))
    if 2**n_qubits != channel.dim:
        raise ConfigError("design", f"n_qubits={n_qubits} does not match channel dimension {channel.dim}")

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "must be a non-negative integer")

    plan_doc = doc.get("plan")
    plan = None
    if plan_doc:
        K = 2**n_qubits * (2**n_qubits + 1)
        try:
            plan = make_plan(K, int(plan_doc.get("M", K)), plan_doc.get("mode", WITHOUT_REPLACEMENT), seed)
        except (ValueError, TypeError) as exc:
            raise ConfigError("plan", str(exc)) from None

    fidelity_samples = doc.get("fidelity_samples", DEFAULT_FIDELITY_SAMPLES)
    if not isinstance(fidelity_samples, int) or fidelity_samples < 2:
        raise ConfigError("fidelity_samples", "must be an integer >= 2")

    return ExperimentConfig(channel, doc["channel"], methods, elements, shots, noise, n_qubits,
                            plan, plan_doc, seed, fidelity_samples)


def run_method(cfg: ExperimentConfig, method: str) -> ChiEstimate:
    if method == STANDARD:
        return standard_qpt(cfg.channel, cfg.shots, cfg.seed)
    design = mub_design(cfg.n_qubits)
    return seqpt_full(cfg.channel, design, cfg.shots, cfg.noise, cfg.seed, cfg.plan, method)


def _flat(arr) -> dict:
    arr = np.asarray(arr)
    return {"re": [float(x) for x in arr.real.reshape(-1)], "im": [float(x) for x in arr.imag.reshape(-1)]}


def _selected_elements(cfg: ExperimentConfig, method: str) -> list:
    basis = cfg.channel.basis
    design = mub_design(cfg.n_qubits)
    if method == STANDARD:
        # linear inversion is all-or-nothing; pick entries afterwards
        est = standard_qpt(cfg.channel, cfg.shots, cfg.seed)
        out = []
        for a, b in cfg.elements:
            ia, ib = basis.index(a), basis.index(b)
            out.append((a, b, complex(est.chi[ia, ib]), float(est.std_errors[ia, ib])))
        return out
    out = []
    for a, b in cfg.elements:
        e = seqpt_element(cfg.channel, a, b, design, cfg.plan, cfg.shots, cfg.noise, cfg.seed, method)
        out.append((a, b, e.value, e.std_error))
    return out


def cmd_tomograph(cfg: ExperimentConfig) -> dict:
    D = cfg.channel.dim
    truth = cfg.channel
    results, channels = {}, {}
    for method in cfg.methods:
        if cfg.elements == "all":
            est = run_method(cfg, method)
            rec = est.channel()
            channels[method] = rec
            fid = channel_fidelity(truth, rec, cfg.fidelity_samples, cfg.seed)
            labels = cfg.channel.basis.labels
            results[method] = {
                "chi": _flat(est.chi),
                "std_errors": [float(x) for x in est.std_errors.reshape(-1)],
                "validation": est.validation().to_dict(),
                "n_settings": est.n_settings,
                "fidelity_to_truth": fid.to_json(),
                "channel": channel_to_json(Channel("chi", est.chi, method)),
                "elements": [
                    {"a": labels[i], "b": labels[j], "re": float(est.chi[i, j].real),
                     "im": float(est.chi[i, j].imag), "std_error": float(est.std_errors[i, j])}
                    for i in range(len(labels)) for j in range(len(labels))
                ],
            }
        else:
            rows = _selected_elements(cfg, method)
            results[method] = {
                "chi": None,
                "channel": None,
                "elements": [{"a": a, "b": b, "re": v.real, "im": v.imag, "std_error": s} for a, b, v, s in rows],
            }
    pairwise = {}
    names = list(channels)
    for i, m1 in enumerate(names):
        for m2 in names[i + 1:]:
            pairwise[f"{m1}|{m2}"] = channel_fidelity(channels[m1], channels[m2], cfg.fidelity_samples, cfg.seed).to_json()
    return {
        "config": cfg.echo(),
        "dim": D,
        "basis": list(cfg.channel.basis.labels),
        "true_chi": _flat(truth.chi()),
        "results": results,
        "pairwise_fidelity": pairwise,
        "resource_counts": {
            "seqpt-element": resource_count("seqpt-element", D),
            "standard-full": resource_count("standard-full", D),
        },
    }


def tomograph_csv(bundle: dict) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["method", "element_a", "element_b", "re", "im", "std_error"])
    for method, res in bundle["results"].items():
        for el in res["elements"]:
            writer.writerow([method, el["a"], el["b"], repr(el["re"]), repr(el["im"]), repr(el["std_error"])])
    return out.getvalue()


def cmd_compare(doc: dict, base_dir: Path = Path(".")) -> dict:
    sources = doc.get("channels")
    if not isinstance(sources, list) or len(sources) != 2:
        raise ConfigError("channels", "needs a list of exactly two channel sources")
    chans = []
    for k, src in enumerate(sources):
        try:
            chans.append(load_channel_source(src, base_dir))
        except ConfigError:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"channels[{k}]", str(exc)) from None
    if chans[0].dim != chans[1].dim:
        raise ConfigError("channels", f"dimension mismatch ({chans[0].dim} vs {chans[1].dim})")
    n = doc.get("n_samples", DEFAULT_FIDELITY_SAMPLES)
    if not isinstance(n, int) or n < 2:
        raise ConfigError("n_samples", "must be an integer >= 2")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "must be a non-negative integer")
    return channel_fidelity(chans[0], chans[1], n, seed).to_json()


def cmd_convergence(doc: dict, base_dir: Path = Path(".")) -> list:
    cfg = parse_config(doc, base_dir)
    basis = cfg.channel.basis
    elements = [(a, b) for a in basis.labels for b in basis.labels] if cfg.elements == "all" else cfg.elements
    method = cfg.methods[0] if cfg.methods[0] != STANDARD else SEQPT_ANCILLA
    design = mub_design(cfg.n_qubits)
    scale_rule = doc.get("scale_rule", "worst-case-deviation")
    enumeration = doc.get("enumerate", "auto")
    if enumeration == "all-subsets" and design.K > 8:
        raise ConfigError("enumerate", f"all-subsets needs K <= 8, design has K={design.K}")
    reports = []
    for a, b in elements:
        vals, _ = per_state_estimates(cfg.channel, a, b, design, cfg.shots, cfg.noise, cfg.seed, method)
        try:
            reports.append(convergence_report(vals, None, scale_rule, enumeration,
                                              int(doc.get("n_perms", 200)), cfg.seed, (a, b)))
        except ValueError as exc:
            raise ConfigError("scale_rule/enumerate", str(exc)) from None
    return reports


def convergence_csv(reports) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=CONVERGENCE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rep in reports:
        writer.writerows(rep.rows())
    return out.getvalue()


def convergence_json(reports) -> dict:
    return {
        "elements": [
            {"a": r.element[0], "b": r.element[1], "scale": r.scale, "scale_rule": r.scale_rule,
             "violations": r.violations, "bound": [float(x) for x in r.bound_curve],
             "max_error": [float(x) for x in r.max_error_curve()],
             "per_state_values": encode_matrix(np.asarray(r.per_state_values))}
            for r in reports
        ]
    }


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqpt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("tomograph", "reconstruct chi with SEQPT and/or standard QPT"),
                        ("compare", "channel fidelity between two channels"),
                        ("convergence", "subset-error vs bound curves for chi elements")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--output", help="output file (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), help="output format")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config_path = Path(args.config)
    try:
        doc = json.loads(config_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"seqpt: cannot read config {config_path}: {exc}", file=sys.stderr)
        return 2
    base_dir = config_path.parent
    if args.seed is not None and isinstance(doc, dict):
        doc["seed"] = args.seed
    out_doc = doc.get("output", {}) if isinstance(doc, dict) else {}
    if isinstance(out_doc, str):
        out_doc = {"path": out_doc}
    path = args.output or out_doc.get("path")
    default_fmt = "csv" if args.command == "convergence" else "json"
    fmt = args.format or out_doc.get("format", default_fmt)
    try:
        if args.command == "tomograph":
            bundle = cmd_tomograph(parse_config(doc, base_dir))
            text = tomograph_csv(bundle) if fmt == "csv" else json.dumps(bundle, indent=2) + "\n"
        elif args.command == "compare":
            text = json.dumps(cmd_compare(doc, base_dir), indent=2) + "\n"
        else:
            reports = cmd_convergence(doc, base_dir)
            text = convergence_csv(reports) if fmt == "csv" else json.dumps(convergence_json(reports), indent=2) + "\n"
    except ConfigError as exc:
        print(f"seqpt: {exc}", file=sys.stderr)
        return 2
    _emit(text, path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
