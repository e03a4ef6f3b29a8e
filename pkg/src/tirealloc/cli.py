"""Command line: single simulations and ablation matrices."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .harness import (PRESETS, AblationConfig, ablation_matrix, report_rows, run, write_outputs,
                      write_report)
from .params import config_from_dict, load_config
from .scenarios import SCENARIOS, ScenarioConfig

log = logging.getLogger("tirealloc")


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tirealloc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scenario under one ablation")
    s.add_argument("--scenario", choices=SCENARIOS, required=True)
    s.add_argument("--load-est", choices=("st", "ltxy", "ltrpz", "true"), default="true")
    s.add_argument("--alloc", choices=("static", "dynamic"), default="static")
    s.add_argument("--constraint", choices=("extremum", "circle", "octagon", "polygon", "none"),
                   default="polygon")
    s.add_argument("--actuator-dynamics", type=_on_off, default=False, metavar="{on,off}")
    s.add_argument("--rate-limits", type=_on_off, default=False, metavar="{on,off}")
    s.add_argument("--bump-comp", type=_on_off, default=True, metavar="{on,off}")
    s.add_argument("--config", help="YAML parameter file (vehicle/tire/actuators/...)")
    s.add_argument("--duration", type=float, help="override the scenario duration (s)")
    s.add_argument("--envelopes-every", type=int, metavar="N",
                   help="dump envelope SVGs every N control periods")
    s.add_argument("--timing", action="store_true", help="record solver timing in the metrics")
    s.add_argument("--no-figures", action="store_true")
    s.add_argument("--out", required=True)

    m = sub.add_parser("matrix", help="run an ablation matrix from a config file")
    m.add_argument("--config", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--no-figures", action="store_true")
    return p


def _simulate(args) -> int:
    cfg = load_config(args.config)
    scenario = ScenarioConfig(args.scenario, duration=args.duration)
    ablation = AblationConfig(args.load_est, args.alloc, args.constraint, args.actuator_dynamics,
                              args.rate_limits, args.bump_comp)
    result = run(scenario, ablation, cfg, timing=args.timing, envelope_every=args.envelopes_every)
    paths = write_outputs(result, args.out, stem=f"{scenario.name}_{ablation.label}",
                          svg=not args.no_figures)
    m = result.metrics
    print(f"{scenario.name} {ablation.label}: max|e_y|={m.max_abs_e_y:.4f} m "
          f"mean|e_y|={m.mean_abs_e_y:.4f} m load error={m.load_est_error_pct:.3f} %")
    for kind, p in paths.items():
        if isinstance(p, list):
            print(f"  {kind}: {len(p)} files")
        else:
            print(f"  {kind}: {p}")
    if m.failure:
        print(f"run failed: {m.failure}", file=sys.stderr)
        return 1
    return 0


# matrix files may use the command-line flag names
_ALIASES = {"load_est": "load_estimator", "alloc": "allocation_mode", "bump_comp": "bump_compensation"}


def _ablation(item: dict) -> AblationConfig:
    kw = {_ALIASES.get(k.replace("-", "_"), k.replace("-", "_")): v for k, v in item.items()}
    for k, v in kw.items():
        if isinstance(v, str) and v in ("on", "off"):
            kw[k] = v == "on"
    return AblationConfig(**kw)


def _ablations_from(spec) -> list[AblationConfig]:
    out = []
    for item in spec:
        if isinstance(item, str):
            if item not in PRESETS:
                raise KeyError(f"unknown preset {item!r}")
            out.append(PRESETS[item])
        else:
            out.append(_ablation(item))
    return out


def _matrix(args) -> int:
    with open(args.config) as fh:
        doc = yaml.safe_load(fh) or {}
    cfg = config_from_dict(doc.get("params"))
    scenarios = [ScenarioConfig(**s) if isinstance(s, dict) else ScenarioConfig(s)
                 for s in doc.get("scenarios", list(SCENARIOS))]
    ablations = _ablations_from(doc.get("ablations", []))
    if doc.get("presets", False):
        ablations += list(PRESETS.values())
    if not ablations:
        raise ValueError("matrix config lists no ablations")
    results = ablation_matrix(scenarios, ablations, cfg, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for r in results:
        write_outputs(r, out, stem=f"{r.scenario.name}_{r.ablation.label}",
                      svg=not args.no_figures)
    write_report(results, out / "report.csv")
    if not args.no_figures:
        from .plotting import plot_matrix
        plot_matrix(report_rows(results), "max_abs_e_y", out / "report_max_abs_e_y.svg")
    failed = [r for r in results if r.metrics.failure]
    print(f"{len(results)} runs, {len(failed)} failed; report: {out / 'report.csv'}")
    for r in failed:
        print(f"  failed: {r.scenario.name} {r.ablation.label}: {r.metrics.failure}", file=sys.stderr)
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _simulate(args) if args.command == "simulate" else _matrix(args)
    except (OSError, ValueError, KeyError, TypeError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
