"""Report emission: delimited rows, a JSON run report, and rendered figures.

CSV columns are fixed; floats are serialized with 17 significant digits so a
rerun of the same config is byte-identical.  Wall time and environment info
live only in the JSON report, which is excluded from the byte-for-byte
determinism contract.
"""

from __future__ import annotations

import hashlib
import json
import platform
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

RUN_COLUMNS = ["check", "index", "item", "statistic", "stat_kind", "stderr",
               "tolerance", "passed"]


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "%.17g" % v
    if v is None:
        return ""
    return str(v)


def digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def write_csv(rows: Sequence[dict], columns: Sequence[str], path: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w") as f:
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(fmt(row.get(c)) for c in columns) + "\n")


def environment_digest() -> dict:
    import matplotlib
    import numba
    return {
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "numpy": np.__version__,
        "numba": numba.__version__,
        "matplotlib": matplotlib.__version__,
    }


def write_json_report(name: str, seed: int, rows: Sequence[dict],
                      wall_time_s: float, path: str) -> None:
    report = {
        "name": name,
        "seed": seed,
        "environment": environment_digest(),
        "wall_time_s": wall_time_s,
        "all_passed": all(r.get("passed", False) for r in rows),
        "checks": list(rows),
    }
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w") as f:
        json.dump(report, f, indent=2, default=fmt)
        f.write("\n")


def _agg() -> None:
    import matplotlib
    matplotlib.use("Agg")


def render_run_figure(rows: Sequence[dict], path: str, title: str = "") -> None:
    """Residual-vs-tolerance bars, one per check row."""
    _agg()
    import matplotlib.pyplot as plt
    if not rows:
        return
    labels = [f"{r['check']}[{r['index']}]:{r.get('item', '')}" for r in rows]
    stats = np.array([max(abs(float(r["statistic"])), 1e-18) for r in rows])
    tols = np.array([max(float(r["tolerance"]), 1e-18) for r in rows])
    colors = ["tab:green" if r["passed"] else "tab:red" for r in rows]
    fig, ax = plt.subplots(figsize=(9, 0.45 * len(rows) + 1.5))
    ypos = np.arange(len(rows))
    ax.barh(ypos, stats, color=colors, height=0.6)
    ax.plot(tols, ypos, "k|", markersize=14, label="tolerance")
    ax.set_xscale("log")
    ax.set_yticks(ypos)
    ax.set_yticklabels(labels, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("|statistic| (log)")
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=7)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_sweep_figure(rows: Sequence[dict], axis: str, path: str,
                        title: str = "") -> None:
    """Log-log statistic vs axis value, grouped by check item."""
    _agg()
    import matplotlib.pyplot as plt
    if not rows:
        return
    fig, ax = plt.subplots(figsize=(7, 5))
    groups = {}
    for r in rows:
        key = f"{r['check']}:{r.get('item', '')}"
        groups.setdefault(key, []).append((float(r["axis_value"]),
                                           abs(float(r["statistic"])),
                                           float(r["stderr"] or 0.0) if r.get("stderr") not in (None, "") else 0.0))
    for key, pts in groups.items():
        pts.sort()
        xs = [p[0] for p in pts]
        ys = [max(p[1], 1e-18) for p in pts]
        es = [p[2] for p in pts]
        ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=key)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(axis)
    ax.set_ylabel("|statistic|")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_path_figure(times: np.ndarray, values: np.ndarray, path: str,
                       title: str = "") -> None:
    _agg()
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(7, 4))
    for j in range(values.shape[1]):
        ax.plot(times, values[:, j], lw=1.0, label=f"coord_{j}")
    ax.set_xlabel("t")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
