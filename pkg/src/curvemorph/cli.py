"""Command-line surface: simulate, run, classify, report.

Datasets travel as long-form landmark CSVs
(``specimen_id,label,landmark_index,x,y,z``), one file per replicate.
Numeric output uses 17 significant digits so values round-trip exactly;
every command writes a ``manifest.json`` recording its seed and settings.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 partial
pipeline failure.
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from curvemorph import __version__
from curvemorph.classify import CLASSIFIER_NAMES, cross_validate, lda_fit, lda_predict, standardize_apply, standardize_fit, stratified_kfold
from curvemorph.landmarks import LandmarkConfiguration
from curvemorph.pipelines import PIPELINE_IDS, PipelineSettings, canonical_pipeline_id, run_pipeline
from curvemorph.simgen import SimConfig, generate_replicate


class InputError(Exception):
    """Malformed or missing input; maps to exit code 2."""


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


# ---------------------------------------------------------------------------
# landmark CSV format

LANDMARK_HEADER = ["specimen_id", "label", "landmark_index", "x", "y", "z"]


def write_landmark_csv(path: Path, configs: list[LandmarkConfiguration]) -> None:
    rows = []
    for cfg in configs:
        for i, (x, y, z) in enumerate(cfg.points):
            rows.append([cfg.specimen_id, cfg.label if cfg.label is not None else "", i, x, y, z])
    write_csv(path, LANDMARK_HEADER, rows)


def read_landmark_csv(path: Path) -> list[LandmarkConfiguration]:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != LANDMARK_HEADER:
                raise InputError(f"{path}: expected header {','.join(LANDMARK_HEADER)}")
            by_specimen: dict[str, tuple[str, list[tuple[int, float, float, float]]]] = {}
            order: list[str] = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 6:
                    raise InputError(f"{path}:{lineno}: expected 6 fields")
                sid, label, idx, x, y, z = row
                try:
                    entry = (int(idx), float(x), float(y), float(z))
                except ValueError as exc:
                    raise InputError(f"{path}:{lineno}: {exc}") from exc
                if sid not in by_specimen:
                    by_specimen[sid] = (label, [])
                    order.append(sid)
                by_specimen[sid][1].append(entry)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc

    configs = []
    for sid in order:
        label, entries = by_specimen[sid]
        entries.sort(key=lambda e: e[0])
        indices = [e[0] for e in entries]
        if indices != list(range(len(entries))):
            raise InputError(f"{path}: specimen {sid}: landmark_index not contiguous from 0")
        pts = np.array([[e[1], e[2], e[3]] for e in entries])
        try:
            configs.append(LandmarkConfiguration(sid, pts, label or None))
        except ValueError as exc:
            raise InputError(f"{path}: specimen {sid}: {exc}") from exc
    if not configs:
        raise InputError(f"{path}: no specimens")
    n = configs[0].n_landmarks
    if any(c.n_landmarks != n for c in configs):
        raise InputError(f"{path}: specimens disagree on landmark count")
    return configs


def read_labels_csv(path: Path) -> dict[str, str]:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["specimen_id", "label"]:
                raise InputError(f"{path}: expected header specimen_id,label")
            return {row[0]: row[1] for row in reader if row}
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def apply_labels(configs: list[LandmarkConfiguration], labels: dict[str, str]) -> list[LandmarkConfiguration]:
    missing = [c.specimen_id for c in configs if c.specimen_id not in labels]
    if missing:
        raise InputError(f"label file does not cover specimens: {', '.join(missing)}")
    return [LandmarkConfiguration(c.specimen_id, c.points, labels[c.specimen_id]) for c in configs]


# ---------------------------------------------------------------------------
# configuration plumbing

_CONFIG_KEYS = {
    "seed": int,
    "out": str,
    "data": str,
    "labels": str,
    "pipelines": str,
    "classifiers": str,
    "threads": int,
    "n_reps": int,
    "specimen": int,
    "svg": lambda s: s.lower() in ("1", "true", "yes"),
    "n_points": int,
    "n_basis": int,
    "variance_threshold": float,
    "alpha_soft": float,
    "lambda_soft": float,
    "m_target": int,
}


def read_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise InputError(f"{path}:{lineno}: expected key=value")
                key, _, raw = line.partition("=")
                key = key.strip()
                if key not in _CONFIG_KEYS:
                    raise InputError(f"{path}:{lineno}: unknown key {key!r}")
                try:
                    values[key] = _CONFIG_KEYS[key](raw.strip())
                except ValueError as exc:
                    raise InputError(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    return values


def _merged(args: argparse.Namespace) -> dict:
    """Config-file values overridden by any flag given on the command line."""
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            values[key] = flag
    values.setdefault("seed", 0)
    values.setdefault("threads", 1)
    return values


def settings_from(values: dict) -> PipelineSettings:
    kwargs = {
        k: values[k]
        for k in ("n_points", "n_basis", "variance_threshold", "alpha_soft", "lambda_soft", "m_target")
        if k in values
    }
    return PipelineSettings(**kwargs)


def _resolve_pipelines(values: dict) -> list[str]:
    raw = values.get("pipelines", "all")
    if raw.strip().lower() == "all":
        return list(PIPELINE_IDS)
    try:
        return [canonical_pipeline_id(p) for p in raw.split(",") if p.strip()]
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _resolve_classifiers(values: dict) -> list[str]:
    raw = values.get("classifiers", "all")
    if raw.strip().lower() == "all":
        return list(CLASSIFIER_NAMES)
    names = [c.strip().lower() for c in raw.split(",") if c.strip()]
    for name in names:
        if name not in CLASSIFIER_NAMES:
            raise InputError(f"unknown classifier {name!r}; valid: {', '.join(CLASSIFIER_NAMES)}")
    return names


def _resolve_data(values: dict) -> list[Path]:
    raw = values.get("data")
    if not raw:
        raise InputError("no input data given (--data)")
    paths: list[Path] = []
    for token in raw.split(","):
        token = token.strip()
        if not token:
            continue
        p = Path(token)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.csv")))
        elif any(ch in token for ch in "*?["):
            paths.extend(sorted(Path(m) for m in glob.glob(token)))
        else:
            paths.append(p)
    if not paths:
        raise InputError(f"no dataset files match {raw!r}")
    for p in paths:
        if not p.is_file():
            raise InputError(f"dataset file not found: {p}")
    return paths


def _out_dir(values: dict) -> Path:
    out = values.get("out")
    if not out:
        raise InputError("no output directory given (--out)")
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {path}: {exc}") from exc
    return path


def write_manifest(out: Path, command: str, values: dict, outputs: list[str], failures: list[str]) -> None:
    manifest = {
        "tool": f"curvemorph {__version__}",
        "command": command,
        "seed": values.get("seed", 0),
        "settings": {k: v for k, v in sorted(values.items()) if k != "out"},
        "outputs": sorted(outputs),
        "failures": failures,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(args) -> int:
    values = _merged(args)
    out = _out_dir(values)
    config = SimConfig(
        n_points=values.get("n_points", 30),
        n_reps=values.get("n_reps", 50),
        seed=values["seed"],
    )
    outputs = []
    for rep in range(config.n_reps):
        path = out / f"replicate_{rep:03d}.csv"
        write_landmark_csv(path, generate_replicate(config, rep))
        outputs.append(path.name)
    write_manifest(out, "simulate", values | {"sim_config": asdict(config)}, outputs, [])
    print(f"wrote {len(outputs)} replicate(s) to {out}")
    return 0


def _load_replicates(values: dict) -> list[tuple[str, list[LandmarkConfiguration]]]:
    labels = read_labels_csv(Path(values["labels"])) if values.get("labels") else None
    replicates = []
    for path in _resolve_data(values):
        configs = read_landmark_csv(path)
        if labels is not None:
            configs = apply_labels(configs, labels)
        replicates.append((path.stem, configs))
    return replicates


def _run_tasks(tasks, worker, threads: int) -> dict:
    """Evaluate independent tasks, possibly in parallel; results keyed deterministically."""
    results = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {key: pool.submit(worker, *key) for key in tasks}
            for key in tasks:
                results[key] = futures[key].result()
    else:
        for key in tasks:
            results[key] = worker(*key)
    return results


def cmd_run(args) -> int:
    values = _merged(args)
    out = _out_dir(values)
    settings = settings_from(values)
    pipelines = _resolve_pipelines(values)
    replicates = _load_replicates(values)
    specimen_idx = values.get("specimen", 0)
    threads = values["threads"]

    tasks = [(rep_name, pid) for rep_name, _ in replicates for pid in pipelines]
    data_by_rep = dict(replicates)

    def worker(rep_name, pid):
        try:
            return run_pipeline(pid, data_by_rep[rep_name], settings)
        except ValueError as exc:
            return exc

    results = _run_tasks(tasks, worker, threads)
    failures = [f"{rep}/{pid}: {res}" for (rep, pid), res in results.items() if isinstance(res, Exception)]

    outputs = []
    k95_rows, mse_rows = [], []
    for pid in pipelines:
        per_rep = [results[(rep, pid)] for rep, _ in replicates if not isinstance(results[(rep, pid)], Exception)]
        if not per_rep:
            continue
        k95_rows.append([pid, float(np.mean([o.k95 for o in per_rep]))])
        mse_means = np.array([o.mse_mean for o in per_rep])
        mse_rows.append([pid, mse_means.mean(), mse_means.std(ddof=1) if len(per_rep) > 1 else 0.0])

        score_rows, scree_rows = [], []
        for rep_name, configs in replicates:
            output = results[(rep_name, pid)]
            if isinstance(output, Exception):
                continue
            for i, cfg in enumerate(configs):
                score_rows.append([rep_name, cfg.specimen_id, cfg.label or ""] + list(output.scores[i]))
            total = output.eigenvalues.sum()
            cum = np.cumsum(output.eigenvalues) / total
            for j, (ev, cf) in enumerate(zip(output.eigenvalues, cum), start=1):
                scree_rows.append([rep_name, j, ev, cf])
        k_cols = max(len(r) - 3 for r in score_rows)
        write_csv(out / f"scores_{pid}.csv", ["replicate", "specimen_id", "label"] + [f"score_{j+1}" for j in range(k_cols)], score_rows)
        write_csv(out / f"scree_{pid}.csv", ["replicate", "component", "eigenvalue", "cumulative_fraction"], scree_rows)
        outputs += [f"scores_{pid}.csv", f"scree_{pid}.csv"]

        rep_name, configs = replicates[0]
        output = results[(rep_name, pid)]
        if not isinstance(output, Exception) and 0 <= specimen_idx < len(configs):
            cfg = configs[specimen_idx]
            target = output.fitted.mse_target(specimen_idx)
            recon = output.reconstructions[specimen_idx]
            rows = [
                [i, *target[i], *recon[i]]
                for i in range(target.shape[0])
            ]
            name = f"recon_{pid}_{cfg.specimen_id}.csv"
            write_csv(out / name, ["landmark_index", "orig_x", "orig_y", "orig_z", "recon_x", "recon_y", "recon_z"], rows)
            outputs.append(name)

    if k95_rows:
        write_csv(out / "k95.csv", ["pipeline", "k95"], k95_rows)
        write_csv(out / "mse.csv", ["pipeline", "mean", "sd"], mse_rows)
        outputs += ["k95.csv", "mse.csv"]

    write_manifest(out, "run", values, outputs, failures)
    if failures and k95_rows:
        print("partial failure:\n  " + "\n  ".join(failures), file=sys.stderr)
        return 4
    if failures:
        print("all pipelines failed:\n  " + "\n  ".join(failures), file=sys.stderr)
        return 3
    print(f"wrote results for {len(pipelines)} pipeline(s) to {out}")
    return 0


def _best_adjacent_pair(scores: np.ndarray, labels: np.ndarray, seed: int) -> tuple[int, float]:
    """Index j of the adjacent score pair (j, j+1) with the best LDA CV accuracy."""
    best_j, best_acc = 0, -1.0
    folds = stratified_kfold(labels, k=5, seed=seed)
    for j in range(scores.shape[1] - 1):
        pair = scores[:, j : j + 2]
        accs = []
        for f in range(5):
            tr, te = folds != f, folds == f
            if np.unique(labels[tr]).size < 2:
                continue
            try:
                std = standardize_fit(pair[tr])
                model = lda_fit(standardize_apply(std, pair[tr]), labels[tr])
                pred = lda_predict(model, standardize_apply(std, pair[te]))
                accs.append(float(np.mean(pred == labels[te])))
            except ValueError:
                continue
        acc = float(np.mean(accs)) if accs else -1.0
        if acc > best_acc:
            best_j, best_acc = j, acc
    return best_j, best_acc


def _write_scatter_svg(path: Path, pair: np.ndarray, labels: np.ndarray, title: str) -> None:
    width, height, margin = 640, 480, 50
    x, y = pair[:, 0], pair[:, 1]
    spans = []
    for v in (x, y):
        lo, hi = float(v.min()), float(v.max())
        pad = 0.05 * (hi - lo) if hi > lo else 1.0
        spans.append((lo - pad, hi - lo + 2 * pad))
    classes = sorted(set(labels))
    palette = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"]
    colors = {c: palette[i % len(palette)] for i, c in enumerate(classes)}
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width / 2}" y="20" text-anchor="middle">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
    ]
    for xi, yi, lbl in zip(x, y, labels):
        px = margin + (xi - spans[0][0]) / spans[0][1] * (width - 2 * margin)
        py = height - margin - (yi - spans[1][0]) / spans[1][1] * (height - 2 * margin)
        parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="4" fill="{colors[lbl]}" fill-opacity="0.8"/>')
    for i, c in enumerate(classes):
        parts.append(f'<circle cx="{width - margin - 100}" cy="{margin + 18 * i}" r="4" fill="{colors[c]}"/>')
        parts.append(f'<text x="{width - margin - 90}" y="{margin + 18 * i + 4}">{c}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")


def cmd_classify(args) -> int:
    values = _merged(args)
    out = _out_dir(values)
    settings = settings_from(values)
    pipelines = _resolve_pipelines(values)
    classifiers = _resolve_classifiers(values)
    replicates = _load_replicates(values)
    seed = values["seed"]
    threads = values["threads"]

    for rep_name, configs in replicates:
        if any(c.label is None for c in configs):
            raise InputError(f"{rep_name}: specimens without labels; provide --labels")

    tasks = [(rep, pid, clf) for rep, _ in replicates for pid in pipelines for clf in classifiers]
    data_by_rep = dict(replicates)

    def worker(rep_name, pid, clf):
        try:
            return cross_validate(data_by_rep[rep_name], pid, clf, k=5, seed=seed, settings=settings)
        except ValueError as exc:
            return exc

    results = _run_tasks(tasks, worker, threads)
    failures = [f"{rep}/{pid}/{clf}: {res}" for (rep, pid, clf), res in results.items() if isinstance(res, Exception)]

    rows, summary = [], []
    for pid in pipelines:
        for clf in classifiers:
            accs = []
            for rep_name, _ in replicates:
                report = results[(rep_name, pid, clf)]
                if isinstance(report, Exception):
                    continue
                for f, acc in enumerate(report.per_fold_accuracy):
                    rows.append([rep_name, pid, clf, f, acc])
                accs.append(report.mean_accuracy)
            if accs:
                accs = np.array(accs)
                summary.append([pid, clf, accs.mean(), accs.std(ddof=1) if accs.size > 1 else 0.0])

    outputs = []
    if rows:
        write_csv(out / "cv_report.csv", ["replicate", "pipeline", "classifier", "fold", "accuracy"], rows)
        write_csv(out / "cv_summary.csv", ["pipeline", "classifier", "mean_accuracy", "sd_accuracy"], summary)
        outputs += ["cv_report.csv", "cv_summary.csv"]

    if values.get("svg") and not isinstance(results.get(tasks[0][:3]), Exception):
        rep_name, configs = replicates[0]
        labels = np.array([c.label for c in configs])
        for pid in pipelines:
            try:
                output = run_pipeline(pid, configs, settings)
            except ValueError:
                continue
            if output.scores.shape[1] < 2:
                continue
            j, acc = _best_adjacent_pair(output.scores, labels, seed)
            pair = output.scores[:, j : j + 2]
            write_csv(
                out / f"pc_pairs_{pid}.csv",
                ["specimen_id", "label", f"score_{j+1}", f"score_{j+2}"],
                [[c.specimen_id, c.label, pair[i, 0], pair[i, 1]] for i, c in enumerate(configs)],
            )
            _write_scatter_svg(
                out / f"pc_pairs_{pid}.svg",
                pair,
                labels,
                f"{pid}: components {j + 1} vs {j + 2} (LDA CV {acc:.3f})",
            )
            outputs += [f"pc_pairs_{pid}.csv", f"pc_pairs_{pid}.svg"]

    write_manifest(out, "classify", values, outputs, failures)
    if failures and rows:
        print("partial failure:\n  " + "\n  ".join(failures), file=sys.stderr)
        return 4
    if failures:
        print("all classification tasks failed:\n  " + "\n  ".join(failures), file=sys.stderr)
        return 3
    print(f"wrote cross-validation report to {out}")
    return 0


def cmd_report(args) -> int:
    values = _merged(args)
    out = Path(values.get("out") or ".")
    manifest_path = out / "manifest.json"
    if not manifest_path.is_file():
        raise InputError(f"no manifest.json in {out}")
    manifest = json.loads(manifest_path.read_text())
    lines = [f"curvemorph results in {out}", f"command: {manifest.get('command')}", f"seed: {manifest.get('seed')}"]
    for table in ("k95.csv", "mse.csv", "cv_summary.csv"):
        path = out / table
        if not path.is_file():
            continue
        lines.append("")
        lines.append(table)
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                pretty = []
                for cell in row:
                    try:
                        pretty.append(f"{float(cell):.5g}")
                    except ValueError:
                        pretty.append(cell)
                lines.append("  " + "  ".join(f"{c:>14}" for c in pretty))
    if manifest.get("failures"):
        lines.append("")
        lines.append("failures:")
        lines += ["  " + f for f in manifest["failures"]]
    print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file; flags override it")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (results independent of count)")


def _add_settings(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-points", dest="n_points", type=int, default=None)
    parser.add_argument("--n-basis", dest="n_basis", type=int, default=None)
    parser.add_argument("--variance-threshold", dest="variance_threshold", type=float, default=None)
    parser.add_argument("--alpha-soft", dest="alpha_soft", type=float, default=None)
    parser.add_argument("--lambda-soft", dest="lambda_soft", type=float, default=None)
    parser.add_argument("--m-target", dest="m_target", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curvemorph", description="Morphometric pipelines for 3D landmark curves")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate helix simulation replicates as landmark CSVs")
    _add_common(p_sim)
    p_sim.add_argument("--n-reps", dest="n_reps", type=int, default=None)
    p_sim.add_argument("--n-points", dest="n_points", type=int, default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_run = sub.add_parser("run", help="run pipelines over replicate datasets")
    _add_common(p_run)
    p_run.add_argument("--data", default=None, help="CSV file(s), directory, or glob; comma-separated")
    p_run.add_argument("--labels", default=None, help="specimen_id,label CSV joined onto the data")
    p_run.add_argument("--pipelines", default=None, help="comma-separated pipeline ids or 'all'")
    p_run.add_argument("--specimen", type=int, default=None, help="specimen index for reconstruction tables")
    _add_settings(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cls = sub.add_parser("classify", help="cross-validated classification per pipeline")
    _add_common(p_cls)
    p_cls.add_argument("--data", default=None)
    p_cls.add_argument("--labels", default=None)
    p_cls.add_argument("--pipelines", default=None)
    p_cls.add_argument("--classifiers", default=None, help="comma-separated: lda,multinomial,svm or 'all'")
    p_cls.add_argument("--svg", action="store_true", default=False, help="emit best-pair scatter SVGs")
    _add_settings(p_cls)
    p_cls.set_defaults(func=cmd_classify)

    p_rep = sub.add_parser("report", help="print a summary of a results directory")
    _add_common(p_rep)
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
