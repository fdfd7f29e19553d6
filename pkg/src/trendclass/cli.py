"""Command-line front end for the three-step workflow.

    trendclass trec1 data.csv -o run/
    trendclass trec2 run/ --groups 3 [--no-clustering] [--pvar V2,V7]
    trendclass trec3 run/ --targets Downward=V1,V6,V9 --targets Upward=V8 --targets Flat=V2
    trendclass train-icons --group Upward --synth --n-per-icon 100 --seed 7 -o upward.json

Each step reads and rewrites ``run/state.json`` and writes its figures next
to it.  Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
import warnings
from importlib import resources
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from . import icons as icon_mod
from . import report
from .ingest import DatasetError, prepare, read_dataset
from .multi import classify_to_targets
from .rough import ClassificationError, normalize_group, rough_classify
from .state import PipelineState, StateError, removed_report
from .trend import TrendError, fit_all

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
STATE_FILE = "state.json"
TARGET_GRAMMAR = "GROUP=NAME[,NAME...] with GROUP one of Downward, Upward, Flat"
FEATURE_COLUMNS = ("icon", "x0", "d1", "d2", "gamma0", "gamma1", "gamma2", "gamma3")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _say(msg: str = ""):
    print(msg)


def _state_path(workdir) -> Path:
    return Path(workdir) / STATE_FILE


# ---------------------------------------------------------------------------
# steps


def cmd_trec1(input_path, outdir) -> PipelineState:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    data = read_dataset(input_path)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        clean = prepare(data)
    for w in caught:
        _say(f"warning: {w.message}")
    fits = fit_all(clean)

    _say("Variable names:")
    for orig, canon in clean.name_map.items():
        _say(f"  {canon}: {orig}")
    if clean.removed:
        _say("The following variable(s) is/are removed:")
        _say("  " + ", ".join(removed_report(clean)))

    raw = {clean.name_map[k]: v for k, v in data.variables.items()}
    state = PipelineState(clean, raw, fits, config={"trec1": {"input": Path(input_path).name}})
    state.save(outdir / STATE_FILE)

    t = clean.time_labels
    titles = {k: f"{k} ({orig})" for orig, k in clean.name_map.items()}
    report.write_pages(report.render_figure(report.raw_data_spec(t, raw, titles)), outdir, "fig_rawdata")
    report.write_pages(report.render_figure(report.std_data_spec(t, clean.variables)), outdir, "fig_stddata")
    report.write_pages(report.render_figure(report.trend_panel_spec(t, clean.variables, fits)),
                       outdir, "fig_ctrend")
    report.write_pages(report.render_figure(report.trend_overlay_spec(t, fits)), outdir, "fig_trend",
                       numbered=False)
    _say(f"Fitted {len(fits)} trends: " + ", ".join(f"{k} (d={f.degree})" for k, f in fits.items()))
    return state


def cmd_trec2(workdir, groups: int = 2, clustering: bool = True,
              pvar: Sequence[str] | None = None) -> PipelineState:
    workdir = Path(workdir)
    state = PipelineState.load(_state_path(workdir))
    state.require("trec2")
    res = rough_classify(state.fits, groups=groups, clustering=clustering, pvar=pvar)
    state.rough = res
    state.assignment, state.icons = None, {}
    state.config = {k: v for k, v in state.config.items() if k == "trec1"}
    state.config["trec2"] = {"groups": groups, "clustering": clustering,
                             "pvar": list(pvar) if pvar else None}
    state.save(workdir / STATE_FILE)

    method = "clustering of discriminant scores" if clustering else "discriminant function"
    t = state.dataset.time_labels
    spec = report.group_panel_spec(t, state.fits, res.groups, f"Trend groups ({method})")
    report.write_pages(report.render_figure(spec), workdir, "fig_groups", numbered=False)
    dend_file = workdir / "fig_dendrogram.svg"
    if res.dendrogram is not None:
        report.write_pages(report.render_figure(report.dendrogram_spec(res.dendrogram, res.groups)),
                           workdir, "fig_dendrogram", numbered=False)
        _say("Dendrogram: " + res.dendrogram.to_text())
    elif dend_file.exists():
        dend_file.unlink()

    for g in ("Upward", "Flat", "Downward"):
        members = res.members(g)
        if members:
            _say(f"{g}: {', '.join(members)}")
    if res.not_applicable:
        _say("The following group(s) is/are not applicable:")
        _say("  " + ", ".join(f'"{g}"' for g in res.not_applicable))
    return state


def parse_targets(specs: Sequence[str]) -> Dict[str, List[str]]:
    """``["Downward=V1,V6", "Upward=V8"]`` -> ``{"Downward": ["V1", "V6"], ...}``."""
    out: Dict[str, List[str]] = {}
    for spec in specs:
        group, sep, names = spec.partition("=")
        if not sep or not group.strip():
            raise UsageError(f"malformed target {spec!r}; expected {TARGET_GRAMMAR}")
        try:
            group = normalize_group(group)
        except ClassificationError as exc:
            raise UsageError(f"{exc}; expected {TARGET_GRAMMAR}") from None
        items = [n.strip() for n in names.split(",") if n.strip()]
        if group in out:
            raise UsageError(f"group {group} given twice")
        out[group] = items
    if not out:
        raise UsageError(f"no targets given; expected {TARGET_GRAMMAR}")
    return out


def resolve_model_dir(model_dir=None):
    if model_dir:
        return model_dir
    return os.environ.get("TREC_MODEL_DIR") or None


def cmd_trec3(workdir, targets: Dict[str, List[str]], model_dir=None) -> PipelineState:
    workdir = Path(workdir)
    state = PipelineState.load(_state_path(workdir))
    state.require("trec3")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assignment = classify_to_targets(state.fits, state.rough.groups, targets)
    for w in caught:
        _say(f"warning: {w.message}")
    icons = icon_mod.assign_icons(assignment, state.rough.groups, state.fits,
                                  resolve_model_dir(model_dir))
    state.assignment, state.icons = assignment, icons
    state.config["trec3"] = {"targets": {g: list(v) for g, v in targets.items()}}
    state.save(workdir / STATE_FILE)

    table = report.summary_table(assignment, icons)
    (workdir / "summary.csv").write_text(table.to_csv(), encoding="utf-8")
    report.write_pages(report.render_figure(report.icon_table_spec(table, state.fits)),
                       workdir, "fig_icons", numbered=False)
    _say(f"{'group':<9} {'target':<7} {'icon':>4}  members")
    for r in table.rows:
        _say(f"{r.group:<9} {r.target:<7} {r.icon:>4}  {', '.join(r.members)}")
    return state


def read_feature_file(path) -> List[tuple]:
    """Labeled features: header ``icon,x0,d1,d2,gamma0..gamma3``, one row per trend."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in FEATURE_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DatasetError(f"feature file lacks columns {missing}")
        for i, rec in enumerate(reader, start=2):
            try:
                x = np.array([float(rec[c]) for c in FEATURE_COLUMNS[1:]])
                rows.append((x, int(rec["icon"])))
            except ValueError:
                raise DatasetError("non-numeric cell", row=i) from None
    return rows


def write_feature_file(path, data) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_COLUMNS)
        for x, icon in data:
            w.writerow([icon, *(repr(float(v)) for v in x)])


def cmd_train_icons(group: str, out, data_file=None, n_per_icon: int = 100,
                    noise_sd: float = 0.15, seed: int = 0, ridge: float = icon_mod.DEFAULT_RIDGE):
    group = normalize_group(group)
    if data_file:
        data = read_feature_file(data_file)
        seed_used = None
    else:
        data = icon_mod.synth_training_set(group, n_per_icon, noise_sd, seed)
        seed_used = seed
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = icon_mod.train(group, data, ridge=ridge, seed=seed_used)
    for w in caught:
        _say(f"warning: {w.message}")
    if data_file is None:
        model.training_meta["synthetic"] = {"n_per_icon": n_per_icon, "noise_sd": noise_sd}
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(icon_mod.save_model(model), encoding="utf-8")
    m = model.training_meta
    status = "converged" if m["converged"] else "NOT converged"
    _say(f"{group}: {m['n_samples']} samples, {status} after {m['iterations']} Newton steps, "
         f"gradient norm {m['grad_norm']:.2e}, training accuracy {m['train_accuracy']:.3f}")
    return model


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="trendclass", description="Polynomial trend estimation and classification")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s1 = sub.add_parser("trec1", help="standardize and fit polynomial trends")
    s1.add_argument("input", help="CSV file; first column holds the time labels")
    s1.add_argument("-o", "--out", default="trec_out", help="output directory (default: trec_out)")

    s2 = sub.add_parser("trec2", help="rough Upward/Flat/Downward classification")
    s2.add_argument("workdir", help="directory holding state.json from trec1")
    s2.add_argument("--groups", type=int, choices=(2, 3), default=2)
    s2.add_argument("--no-clustering", dest="clustering", action="store_false",
                    help="group by discriminant function alone")
    s2.add_argument("--pvar", help="two variables whose trends replace the default targets, e.g. V2,V7")

    s3 = sub.add_parser("trec3", help="nearest-target classification and icon assignment")
    s3.add_argument("workdir")
    s3.add_argument("--targets", action="append", default=[], metavar="GROUP=NAMES",
                    help=TARGET_GRAMMAR + "; repeat per group")
    s3.add_argument("--model-dir", help="directory with upward.json, downward.json, flat.json "
                                        "(default: $TREC_MODEL_DIR or the bundled models)")

    st = sub.add_parser("train-icons", help="fit an icon discriminator for one group")
    st.add_argument("--group", required=True)
    src = st.add_mutually_exclusive_group()
    src.add_argument("--synth", action="store_true", help="train on synthetic shapes (default)")
    src.add_argument("--data", help="labeled feature CSV (" + ",".join(FEATURE_COLUMNS) + ")")
    st.add_argument("--n-per-icon", type=int, default=100)
    st.add_argument("--noise-sd", type=float, default=0.15)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--ridge", type=float, default=icon_mod.DEFAULT_RIDGE)
    st.add_argument("-o", "--out", required=True)

    se = sub.add_parser("example", help="write the bundled 9-variable example table")
    se.add_argument("-o", "--out", default="-", help="file to write (default: stdout)")
    return p


def example_csv() -> str:
    return (resources.files("trendclass") / "data" / "example.csv").read_text(encoding="utf-8")


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "trec1":
            cmd_trec1(args.input, args.out)
        elif args.command == "trec2":
            pvar = None
            if args.pvar:
                pvar = [v.strip() for v in args.pvar.split(",")]
                if len(pvar) != 2:
                    raise UsageError("--pvar takes exactly two names, e.g. --pvar V2,V7")
            cmd_trec2(args.workdir, args.groups, args.clustering, pvar)
        elif args.command == "trec3":
            cmd_trec3(args.workdir, parse_targets(args.targets), args.model_dir)
        elif args.command == "train-icons":
            cmd_train_icons(args.group, args.out, args.data, args.n_per_icon, args.noise_sd,
                            args.seed, args.ridge)
        elif args.command == "example":
            text = example_csv()
            if args.out == "-":
                sys.stdout.write(text)
            else:
                Path(args.out).write_text(text, encoding="utf-8")
    except UsageError as exc:
        print(f"trendclass: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, ClassificationError, StateError, icon_mod.IconModelError,
            report.ReportError, OSError) as exc:
        print(f"trendclass: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrendError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"trendclass: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
