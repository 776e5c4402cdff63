"""Figure rendering for experiment output.

Each report CSV gets a companion PNG: runs render mean relative error
per algorithm across capacities, sweeps render the approximation-ratio
curve with the sqrt(n*k) feasibility threshold marked. Rendering is
headless (Agg) and entirely optional; the tables stand on their own.
"""

from __future__ import annotations

from pathlib import Path

from .experiment import AggregateRow, SweepRow, aggregate

_STYLE = {
    "greedy": dict(color="#444444", marker="s"),
    "tree": dict(color="#1f77b4", marker="o"),
    "rand_greedi": dict(color="#d62728", marker="^"),
    "random": dict(color="#999999", marker="x"),
}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def render_run_figure(rows, path) -> Path:
    """Mean relative error (pct) per algorithm, one line per algorithm
    over the capacity grid; capacity-free baselines draw as horizontal
    reference lines."""
    plt = _pyplot()
    aggs: list[AggregateRow] = aggregate(rows)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    capacities = sorted({a.mu for a in aggs if a.algorithm in ("tree", "rand_greedi")})
    for algorithm in ("tree", "rand_greedi"):
        points = [(a.mu, a.mean_rel_err_pct) for a in aggs if a.algorithm == algorithm]
        if not points:
            continue
        points.sort()
        ax.plot(
            [p[0] for p in points],
            [p[1] for p in points],
            label=algorithm,
            **_STYLE[algorithm],
        )
    for algorithm in ("greedy", "random"):
        levels = [a.mean_rel_err_pct for a in aggs if a.algorithm == algorithm]
        if not levels:
            continue
        ax.axhline(
            levels[0],
            color=_STYLE[algorithm]["color"],
            linestyle="--",
            linewidth=1.0,
            label=algorithm,
        )
    if capacities:
        from matplotlib.ticker import ScalarFormatter

        ax.set_xscale("log")
        ax.set_xticks(capacities)
        ax.get_xaxis().set_major_formatter(ScalarFormatter())
    first = rows[0]
    ax.set_xlabel("per-machine capacity")
    ax.set_ylabel("relative error vs centralized greedy (%)")
    ax.set_title(f"{first.dataset} / {first.objective}, k={first.k}")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def render_sweep_figure(rows: list[SweepRow], path) -> Path:
    """Approximation ratio against capacity, with the sqrt(n*k)
    threshold drawn as a vertical line."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    algorithms = []
    for row in rows:
        if row.algorithm not in algorithms:
            algorithms.append(row.algorithm)
    for algorithm in algorithms:
        points = [(r.mu, r.mean_ratio, r.stdev_ratio) for r in rows if r.algorithm == algorithm]
        points.sort()
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        es = [p[2] for p in points]
        style = _STYLE.get(algorithm, dict(color="#2ca02c", marker="d"))
        ax.errorbar(xs, ys, yerr=es, label=algorithm, capsize=3, **style)
    ax.axvline(
        rows[0].sqrt_nk, color="#666666", linestyle=":", linewidth=1.2,
        label="sqrt(n*k)",
    )
    ax.set_xscale("log")
    ax.set_xlabel("per-machine capacity")
    ax.set_ylabel("value / centralized greedy")
    ax.set_title(f"{rows[0].dataset} / {rows[0].objective}, k={rows[0].k}")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
