"""Renderers for the five figure families.

Each renderer reads only CLI artifacts, returns the parsed data it plotted
(so determinism is testable without decoding images), and writes the image
wherever the spec points.  Style follows the source material: heatmaps on a
log scale with a rainbow colormap (warm end = high density), bifurcation
branches solid when stable and dashed when unstable.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schemas import (
    FigureSpec,
    read_bifurcation_summary,
    read_mfpt_json,
    read_table,
    validate_columns,
)

_STABILITY_STYLE = {"stable": "-", "unstable": "--", "marginal": ":"}


def render(spec: FigureSpec) -> dict:
    """Render one figure; returns the plotted data for verification."""
    fig, data = _RENDERERS[spec.kind](spec)
    if spec.title:
        fig.suptitle(spec.title)
    fig.savefig(spec.output, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return data


def _render_heatmap(spec: FigureSpec):
    table = read_table(spec.inputs["table"])
    validate_columns(table, "heatmap", spec.inputs["table"])
    x = table.column("x")
    mus = np.asarray([float(name) for name in table.header[1:]])
    matrix = np.column_stack([table.column(name) for name in table.header[1:]])

    fig, ax = plt.subplots(figsize=(7, 5))
    mesh = ax.pcolormesh(mus, x, matrix, cmap="rainbow", shading="nearest")
    fig.colorbar(mesh, ax=ax, label="log occupancy")
    ax.set_xlabel(r"mutation rate $\mu$")
    ax.set_ylabel("fraction of strategy A")
    return fig, {"x": x, "mu": mus, "matrix": matrix}


def _render_bifurcation(spec: FigureSpec):
    table = read_table(spec.inputs["branches"])
    validate_columns(table, "bifurcation", spec.inputs["branches"])
    summary = None
    if "summary" in spec.inputs:
        summary = read_bifurcation_summary(spec.inputs["summary"])

    fig, ax = plt.subplots(figsize=(7, 5))
    branch_ids = table.column("branch_id")
    data_branches = {}
    for bid in np.unique(branch_ids):
        mask = branch_ids == bid
        mus = table.column("mu")[mask]
        xs = table.column("x")[mask]
        stab = table.column("stability")[mask]
        data_branches[float(bid)] = (mus, xs, list(stab))
        # draw maximal runs of constant stability with the matching style
        start = 0
        for i in range(1, len(mus) + 1):
            if i == len(mus) or stab[i] != stab[start]:
                style = _STABILITY_STYLE.get(stab[start], "-")
                ax.plot(mus[start:i], xs[start:i], style, color="C0")
                start = i
    events = {"folds": [], "transcritical": []}
    if summary is not None:
        events["folds"] = summary.get("folds", [])
        events["transcritical"] = summary.get("transcritical", [])
        for mu, x in events["folds"]:
            ax.plot(mu, x, "o", color="C3", label="fold")
        for mu, x in events["transcritical"]:
            ax.plot(mu, x, "s", color="C2", label="transcritical")
        if events["folds"] or events["transcritical"]:
            ax.legend(loc="best")
    ax.set_xlabel(r"mutation rate $\mu$")
    ax.set_ylabel("equilibrium fraction of strategy A")
    return fig, {"branches": data_branches, "events": events}


def _render_quasi_compare(spec: FigureSpec):
    table = read_table(spec.inputs["table"])
    validate_columns(table, "quasi_compare", spec.inputs["table"])
    x = table.column("x")
    phi = table.column("phi")
    psi = table.column("psi")
    diff = table.column("diff")

    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
    left.plot(x, phi, label=r"$\Phi$ (diffusion)")
    left.plot(x, psi, "--", label=r"$\Psi$ (WKB)")
    left.set_xlabel("x")
    left.set_ylabel("quasipotential")
    left.legend()
    right.plot(x, diff, color="C3")
    right.set_xlabel("x")
    right.set_ylabel(r"$\Phi - \Psi$")
    fig.tight_layout()
    return fig, {"x": x, "phi": phi, "psi": psi, "diff": diff}


def _render_moments_overlay(spec: FigureSpec):
    table = read_table(spec.inputs["table"])
    validate_columns(table, "moments_overlay", spec.inputs["table"])
    basin = table.column("basin")
    fig, (mean_ax, var_ax) = plt.subplots(1, 2, figsize=(10, 4))
    data = {}
    for name, color in (("minus", "C0"), ("plus", "C1")):
        mask = basin == name
        if not mask.any():
            continue
        mus = table.column("mu")[mask]
        data[name] = {
            "mu": mus,
            "x_star": table.column("x_star")[mask],
            "mean_sim": table.column("mean_sim")[mask],
            "var_sim": table.column("var_sim")[mask],
            "var_lna": table.column("var_lna")[mask],
        }
        mean_ax.plot(mus, data[name]["x_star"], "-", color=color,
                     label=f"x_{name} branch")
        mean_ax.plot(mus, data[name]["mean_sim"], "o", ms=3, color=color,
                     label=f"measured mean ({name})")
        var_ax.plot(mus, data[name]["var_lna"], "-", color=color,
                    label=f"linear-noise ({name})")
        var_ax.plot(mus, data[name]["var_sim"], "o", ms=3, color=color,
                    label=f"measured ({name})")
    mean_ax.set_xlabel(r"$\mu$")
    mean_ax.set_ylabel("mean fraction of A")
    mean_ax.legend(fontsize=8)
    var_ax.set_xlabel(r"$\mu$")
    var_ax.set_ylabel("conditional variance")
    var_ax.set_yscale("log")
    var_ax.legend(fontsize=8)
    fig.tight_layout()
    return fig, data


def _render_mfpt_overlay(spec: FigureSpec):
    payload = read_mfpt_json(spec.inputs["reports"])
    series: dict = {}
    ci = {"mu": [], "lo": [], "hi": []}
    for entry in payload["results"]:
        mu = entry["mu"]
        for report in entry["reports"]:
            series.setdefault(report["method"], {"mu": [], "tau": []})
            series[report["method"]]["mu"].append(mu)
            series[report["method"]]["tau"].append(report["tau_minus_rounds"])
            if report["method"] == "monte_carlo" and "fpt_minus" in report:
                ci["mu"].append(mu)
                ci["lo"].append(report["fpt_minus"]["ci_low"])
                ci["hi"].append(report["fpt_minus"]["ci_high"])

    fig, ax = plt.subplots(figsize=(7, 5))
    styles = {"exact": ("-", "C0"), "diffusion": ("--", "C1"),
              "wkb": (":", "C2"), "monte_carlo": ("", "C3")}
    for method, pts in series.items():
        style, color = styles.get(method, ("-", "C4"))
        if method == "monte_carlo":
            taus = np.asarray(pts["tau"])
            mus = np.asarray(pts["mu"])
            if ci["mu"]:
                yerr = np.vstack([taus - np.asarray(ci["lo"]),
                                  np.asarray(ci["hi"]) - taus])
                ax.errorbar(mus, taus, yerr=yerr, fmt="o", ms=4, color=color,
                            capsize=3, label="Monte Carlo (95% CI)")
            else:
                ax.plot(mus, taus, "o", ms=4, color=color, label="Monte Carlo")
        else:
            ax.plot(pts["mu"], pts["tau"], style, color=color, label=method)
    ax.set_yscale("log")
    ax.set_xlabel(r"mutation rate $\mu$")
    ax.set_ylabel(r"switching time $\tau_-$ (rounds)")
    ax.legend()
    return fig, {"series": series, "ci": ci}


_RENDERERS = {
    "heatmap": _render_heatmap,
    "bifurcation": _render_bifurcation,
    "quasi_compare": _render_quasi_compare,
    "moments_overlay": _render_moments_overlay,
    "mfpt_overlay": _render_mfpt_overlay,
}
