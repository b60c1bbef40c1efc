"""Table/figure emission for experiment bundles.

Writes runs.csv, table.csv, an aligned-text table mirroring the comparison
layout of the benchmark write-ups, bundle.json, and matplotlib figures of
the sampled posteriors next to the delimited output.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .estimators import RunSummary
from .runner import ResultBundle


def emit_runs_csv(summaries: list[RunSummary], path: str | Path) -> Path:
    path = Path(path)
    lines = ["run_id,algorithm,qoi,estimate,n_evals,seconds"]
    for s in summaries:
        for q, v in s.estimates.items():
            lines.append(f"{s.run},{s.algorithm},{q},{v:.17g},{s.n_evals},{s.seconds:.6f}")
    path.write_text("\n".join(lines) + "\n")
    return path


def emit_tables(rows: list[dict], outdir: str | Path, baseline: str | None = "rwm") -> tuple[Path, Path]:
    """CSV + aligned text comparison tables (rows: algorithms, grouped by QoI)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if not rows:
        raise ValueError("no table rows to emit")
    if baseline is not None and not any(r["algorithm"] == baseline for r in rows):
        raise ValueError(f"baseline {baseline!r} missing from results")

    csv_path = outdir / "table.csv"
    cols = ["algorithm", "qoi", "mean", "error", "error_kind", "ratio_vs_baseline",
            "n_runs", "evals_per_sample", "seconds"]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(
            f"{r.get(c):.17g}" if isinstance(r.get(c), float) else str(r.get(c, ""))
            for c in cols
        ))
    csv_path.write_text("\n".join(lines) + "\n")

    qois = list(dict.fromkeys(r["qoi"] for r in rows))
    algos = list(dict.fromkeys(r["algorithm"] for r in rows))
    err_label = "MSE" if rows[0]["error_kind"] == "mse" else "Var"
    base_label = baseline or "baseline"
    header = ["algorithm"]
    for q in qois:
        header += [f"mean[{q}]", f"{err_label}[{q}]", f"{err_label}_{base_label}/{err_label}[{q}]"]
    header += ["evals/sample", "secs/run"]
    table = [header]
    for a in algos:
        row = [a]
        for q in qois:
            r = next(x for x in rows if x["algorithm"] == a and x["qoi"] == q)
            row += [f"{r['mean']:.5f}", f"{r['error']:.3g}",
                    f"{r.get('ratio_vs_baseline', float('nan')):.3g}"]
        r0 = next(x for x in rows if x["algorithm"] == a)
        row += [f"{r0['evals_per_sample']:.2f}", f"{r0['seconds']:.2f}"]
        table.append(row)
    widths = [max(len(row[c]) for row in table) for c in range(len(header))]
    txt = "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                    for row in table)
    txt_path = outdir / "table.txt"
    txt_path.write_text(txt + "\n")
    return csv_path, txt_path


def write_bundle_json(bundle: ResultBundle, path: str | Path) -> Path:
    path = Path(path)
    doc = {
        "config": bundle.config,
        "truth": bundle.truth,
        "baseline": bundle.baseline,
        "meta": bundle.meta,
        "summaries": [dataclasses.asdict(s) for s in bundle.summaries],
        "table": bundle.rows,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _post_burn(arr: np.ndarray, burn_frac: float) -> np.ndarray:
    b = int(np.floor(burn_frac * arr.shape[0]))
    return arr[b:]


def _thin(arr: np.ndarray, max_points: int = 20000) -> np.ndarray:
    if arr.shape[0] <= max_points:
        return arr
    stride = int(np.ceil(arr.shape[0] / max_points))
    return arr[::stride]


def render_figures(bundle: ResultBundle, outdir: str | Path) -> list[Path]:
    """Posterior-sample figures per algorithm plus an efficiency-ratio chart."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    made: list[Path] = []
    burn = float(bundle.config.get("burn_frac", 0.2))
    traces = bundle.traces
    if traces:
        panels = []
        for algo, tr in traces.items():
            if tr.chain1 is not None:
                panels.append((algo, _post_burn(tr.chain1, burn), None))
            else:
                ens = _post_burn(tr.ensembles, burn)
                wts = _post_burn(tr.weights, burn)
                n, K, d = ens.shape
                w_chain = np.zeros((n, K))
                for k in range(K):
                    cols = np.nonzero(tr.perm_first == k)[0]
                    w_chain[:, k] = wts[:, cols].sum(axis=1)
                pooled = ens.reshape(n * K, d)
                panels.append((f"{algo} (weighted)", pooled, w_chain.reshape(n * K)))
                panels.append((f"{algo} (pre-weighting)", pooled, None))
        ncol = min(3, len(panels))
        nrow = int(np.ceil(len(panels) / ncol))
        fig, axes = plt.subplots(nrow, ncol, figsize=(4 * ncol, 3.6 * nrow), squeeze=False)
        dim = panels[0][1].shape[1]
        for ax in axes.ravel()[len(panels):]:
            ax.set_visible(False)
        for ax, (label, pts, wts) in zip(axes.ravel(), panels):
            if dim >= 2:
                sub = _thin(pts)
                wsub = _thin(wts) if wts is not None else None
                ax.hist2d(sub[:, 0], sub[:, 1], bins=80, weights=wsub, cmap="viridis")
            else:
                ax.hist(pts[:, 0], bins=120, weights=wts, density=True, color="#2c7fb8")
            ax.set_title(label)
        fig.suptitle(f"{bundle.config.get('target')}: post burn-in samples (run 0)")
        fig.tight_layout()
        p = outdir / "samples.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        made.append(p)

    rows = [r for r in bundle.rows if "ratio_vs_baseline" in r]
    if rows:
        qois = list(dict.fromkeys(r["qoi"] for r in rows))
        algos = list(dict.fromkeys(r["algorithm"] for r in rows))
        width = 0.8 / len(qois)
        fig, ax = plt.subplots(figsize=(1.6 * len(algos) + 2, 4))
        xs = np.arange(len(algos))
        for qi, q in enumerate(qois):
            vals = [next(r["ratio_vs_baseline"] for r in rows
                         if r["algorithm"] == a and r["qoi"] == q) for a in algos]
            ax.bar(xs + qi * width, vals, width, label=q)
        ax.set_xticks(xs + width * (len(qois) - 1) / 2)
        ax.set_xticklabels(algos)
        ax.set_ylabel(f"error({bundle.baseline}) / error")
        ax.set_yscale("log")
        ax.axhline(1.0, color="k", lw=0.8, ls="--")
        ax.legend()
        fig.tight_layout()
        p = outdir / "ratios.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        made.append(p)
    return made


def emit_all(bundle: ResultBundle, outdir: str | Path, figures: bool = True) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    made = [emit_runs_csv(bundle.summaries, outdir / "runs.csv")]
    if bundle.rows:
        made += list(emit_tables(bundle.rows, outdir, baseline=bundle.baseline))
    made.append(write_bundle_json(bundle, outdir / "bundle.json"))
    if figures:
        made += render_figures(bundle, outdir)
    return made
