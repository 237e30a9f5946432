"""Run reports: delimited output for the adaptive loop plus rendered figures.

``levels.csv`` holds one row per mesh level, ``iterations.csv`` one row per
solver iterate.  The figure helpers render the same data with matplotlib so
a run directory is self-contained: convergence curves, mesh plots, and
solution surfaces land next to the CSV files.
"""

import csv
import io

import numpy as np

LEVEL_COLUMNS = ("level", "elements", "max_h", "exit_code", "iterations",
                 "first_residual", "final_residual", "final_ratio", "gamma",
                 "sigma_final", "eta_total", "zeta_total", "h1_error")
ITERATION_COLUMNS = ("partition", "n", "residual", "ratio", "alpha", "beta",
                     "sigma", "gamma", "exit_flag")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        if not np.isfinite(value):
            return ""
        return f"{value:.17g}"
    return str(value)


def levels_csv_text(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LEVEL_COLUMNS)
    for r in reports:
        writer.writerow([_fmt(v) for v in (
            r.level, r.n_elements, r.max_h, r.exit_code, r.iterations,
            r.first_residual, r.final_residual, r.final_ratio, r.gamma,
            r.sigma_final, r.eta_total, r.zeta_total, r.h1_error)])
    return buf.getvalue()


def iterations_csv_text(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ITERATION_COLUMNS)
    for r in reports:
        o = r.outcome
        h = o.residual_history
        last = len(h) - 1
        for n, residual in enumerate(h):
            ratio = h[n] / h[n - 1] if n > 0 and h[n - 1] != 0 else None
            writer.writerow([_fmt(v) for v in (
                r.level, n, float(residual), ratio, float(o.alphas[n]),
                float(o.betas[n]), float(o.sigmas[n]), r.gamma,
                o.exit_code if n == last else None)])
    return buf.getvalue()


def write_levels_csv(reports, path):
    with open(path, "w") as fh:
        fh.write(levels_csv_text(reports))


def write_iterations_csv(reports, path):
    with open(path, "w") as fh:
        fh.write(iterations_csv_text(reports))


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and any(rows[0].get(c) is None for c in ("level", "final_residual")):
        raise ValueError(f"{path} is not a levels report")
    return rows


def table_report(levels_csv_path):
    """Fixed-width text summary: level, final residual, ratio, sigma, gamma."""
    rows = _read_csv(levels_csv_path)
    header = f"{'Level':>5}  {'|g(u_k)|':>12}  {'ratio':>8}  {'sigma_k':>8}  {'gamma_k':>7}"
    lines = [header, "-" * len(header)]
    for row in rows:
        residual = float(row["final_residual"])
        ratio = row["final_ratio"]
        ratio_txt = f"{float(ratio):8.2f}" if ratio else " " * 8
        sigma = float(row["sigma_final"])
        gamma = float(row["gamma"])
        lines.append(f"{row['level']:>5}  {residual:12.4g}  {ratio_txt}  "
                     f"{sigma:8.4g}  {gamma:7g}")
    return "\n".join(lines) + "\n"


def error_curve(levels_csv_path):
    """(elements, h1_error, eta_total) rows for log-log plots against n^(-1/2)."""
    rows = _read_csv(levels_csv_path)
    out = []
    for row in rows:
        if not row.get("h1_error"):
            raise ValueError("run has no H1 error column; the problem needs "
                             "an exact solution")
        out.append((int(row["elements"]), float(row["h1_error"]),
                    float(row["eta_total"])))
    return out


def error_curve_csv_text(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("elements", "h1_error", "eta_total"))
    for n, err, eta in rows:
        writer.writerow((n, _fmt(float(err)), _fmt(float(eta))))
    return buf.getvalue()


def fit_loglog_slope(n_values, y_values):
    """Least-squares slope of log(y) against log(n)."""
    x = np.log(np.asarray(n_values, dtype=float))
    y = np.log(np.asarray(y_values, dtype=float))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


# -- figures -----------------------------------------------------------------

def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def save_error_curve_figure(rows, path):
    """Log-log H1 error and estimator against element count, with an
    n^(-1/2) guide line."""
    plt = _pyplot()
    n = np.array([r[0] for r in rows], dtype=float)
    err = np.array([r[1] for r in rows], dtype=float)
    eta = np.array([r[2] for r in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(n, eta, "s-", label=r"estimator $\eta$")
    ax.loglog(n, err, "o-", label=r"$H^1$ error")
    guide = eta[0] * (n / n[0]) ** -0.5
    ax.loglog(n, guide, "k--", lw=1, label=r"$n^{-1/2}$")
    ax.set_xlabel("number of elements $n$")
    ax.set_ylabel("error / estimator")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_levels_figure(reports, path):
    """Estimator total (and H1 error when present) against element count."""
    rows = [(r.n_elements, r.h1_error if r.h1_error is not None else np.nan,
             r.eta_total) for r in reports]
    plt = _pyplot()
    n = np.array([r[0] for r in rows], dtype=float)
    err = np.array([r[1] for r in rows], dtype=float)
    eta = np.array([r[2] for r in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(n, eta, "s-", label=r"estimator $\eta$")
    if np.isfinite(err).any():
        ax.loglog(n, err, "o-", label=r"$H^1$ error")
    guide = eta[0] * (n / n[0]) ** -0.5
    ax.loglog(n, guide, "k--", lw=1, label=r"$n^{-1/2}$")
    ax.set_xlabel("number of elements $n$")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_mesh_figure(mesh, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.triplot(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.elements,
               lw=0.4, color="tab:blue")
    ax.set_aspect("equal")
    ax.set_xlabel("$x$")
    ax.set_ylabel("$y$")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_solution_figure(mesh, field, path):
    plt = _pyplot()
    fig = plt.figure(figsize=(6, 5))
    ax = fig.add_subplot(projection="3d")
    ax.plot_trisurf(mesh.vertices[:, 0], mesh.vertices[:, 1], field.values,
                    triangles=mesh.elements, cmap="viridis", linewidth=0.1)
    ax.set_xlabel("$x$")
    ax.set_ylabel("$y$")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
