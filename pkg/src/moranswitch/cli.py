"""Command-line driver: every layer of the package as a subcommand.

Subcommands
-----------
rates       dump the per-round step probabilities and scaled rates
stationary  exact / diffusion / monte-carlo stationary distribution
bifurcation branch continuation plus critical mutation rates
mfpt        switching times by any subset of exact/diffusion/wkb/monte-carlo
sweep       mu-grid heatmaps and conditional moment/variance curves

Flags override values from an optional JSON --config file.  Every randomized
subcommand is deterministic given --seed (a logged default is used when the
flag is omitted).  CSV output uses '.' decimals, a mandatory header row, and
17-significant-digit floats; JSON output embeds the fully resolved
configuration for provenance.  Exit status is 0 only when every requested
computation converged within tolerance; partial results exit nonzero with a
diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence, TextIO

import numpy as np

from . import chain, deterministic, escape, moments
from .chain import ChainParams, SimConfig
from .games import PayoffMatrix, RegimeCase, classify_regime

DEFAULT_SEED = 20250808
DEFAULT_ROUNDS = 200_000
DEFAULT_BURN_IN = 20_000
DEFAULT_REALIZATIONS = 100

MFPT_METHODS = ("exact", "diffusion", "wkb", "monte-carlo")
STATIONARY_METHODS = ("exact", "diffusion", "monte-carlo")


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_csv(stream: TextIO, header: Sequence[str], rows) -> None:
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(_fmt(v) for v in row) + "\n")


def _open_out(path: Optional[str]):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _emit(path: Optional[str], writer) -> None:
    stream, close = _open_out(path)
    try:
        writer(stream)
    finally:
        if close:
            stream.close()


def parse_mu_grid(text: str) -> list[float]:
    """Parse ``lo:hi:step`` into an inclusive grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"expected lo:hi:step, got {text!r}")
    lo, hi, step = (float(p) for p in parts)
    if step <= 0 or not 0 < lo <= hi < 1:
        raise ValueError(f"bad mu grid {text!r}: need 0 < lo <= hi < 1 and step > 0")
    values = []
    k = 0
    while True:
        v = lo + k * step
        if v > hi + 1e-12 * step:
            break
        values.append(v)
        k += 1
    return values


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValueError("config file must hold a JSON object")
    return obj


def _resolve(args: argparse.Namespace, key: str, default=None):
    # Precedence: explicit flag > config file > default.
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    if key in args._config:
        return args._config[key]
    return default


def _resolve_payoff(args) -> PayoffMatrix:
    raw = _resolve(args, "payoff")
    if raw is None:
        raise SystemExit("error: --payoff a,b,c,d (or a config entry) is required")
    if isinstance(raw, str):
        return PayoffMatrix.from_string(raw)
    if isinstance(raw, dict):
        return PayoffMatrix.from_dict(raw)
    raise SystemExit(f"error: cannot parse payoff {raw!r}")


def _resolve_mu(args, allow_grid: bool = True) -> tuple[Optional[float], Optional[list[float]]]:
    mu = _resolve(args, "mu")
    grid_raw = _resolve(args, "mu-grid") if allow_grid else None
    if mu is not None and grid_raw is not None:
        raise SystemExit("error: give exactly one of --mu / --mu-grid")
    if grid_raw is not None:
        grid = grid_raw if isinstance(grid_raw, list) else parse_mu_grid(grid_raw)
        return None, [float(g) for g in grid]
    if mu is None:
        raise SystemExit("error: one of --mu / --mu-grid is required")
    return float(mu), None


def _resolve_seed(args, used_for_randomness: bool) -> int:
    seed = _resolve(args, "seed")
    if seed is None:
        seed = DEFAULT_SEED
        if used_for_randomness:
            print(f"note: no --seed given, using default seed {seed}", file=sys.stderr)
    return int(seed)


def _resolve_sim(args, seed: int) -> SimConfig:
    return SimConfig(
        rounds=int(_resolve(args, "rounds", DEFAULT_ROUNDS)),
        burn_in=int(_resolve(args, "burn-in", DEFAULT_BURN_IN)),
        realizations=int(_resolve(args, "realizations", DEFAULT_REALIZATIONS)),
        seed=seed,
    )


def _config_dict(payoff: PayoffMatrix, **extra) -> dict:
    cfg = {"payoff": payoff.to_dict()}
    cfg.update({k: v for k, v in extra.items() if v is not None})
    return cfg


def _resolve_start(args):
    raw = _resolve(args, "start-state")
    if raw is None or raw == "stratified":
        return raw
    return int(raw)


# -- subcommands -----------------------------------------------------------------


def cmd_rates(args) -> int:
    payoff = _resolve_payoff(args)
    n = int(_resolve(args, "N"))
    mu, _ = _resolve_mu(args, allow_grid=False)
    # Rate evaluation is well defined for mu in [0,1]; the (0,1) restriction
    # only matters for stationary laws and passage times.
    rf = chain.RateFunctions(payoff, mu)
    xs = np.arange(n + 1) / n
    up, dn = rf.up(xs), rf.dn(xs)
    rows = [(i, i / n, up[i], dn[i], up[i], dn[i]) for i in range(n + 1)]
    header = ["i", "x", "w_up", "w_down", "omega_up", "omega_down"]
    fmt = _resolve(args, "format", "csv")
    if fmt == "json":
        payload = {
            "config": _config_dict(payoff, N=n, mu=mu),
            "results": [dict(zip(header, row)) for row in rows],
        }
        _emit(args.out, lambda s: json.dump(payload, s, indent=2))
    else:
        _emit(args.out, lambda s: _write_csv(s, header, rows))
    return 0


def _stationary_by_method(payoff, n, mu, method, sim, start_state):
    params = ChainParams(payoff, n, mu)
    if method == "exact":
        return chain.stationary_exact(params)
    if method == "diffusion":
        return escape.stationary_diffusion(payoff, mu, n)
    if method == "monte-carlo":
        return chain.simulate(params, sim, start_state)
    raise SystemExit(f"error: unknown stationary method {method!r}")


def cmd_stationary(args) -> int:
    payoff = _resolve_payoff(args)
    n = int(_resolve(args, "N"))
    mu, _ = _resolve_mu(args, allow_grid=False)
    methods = [m.strip() for m in _resolve(args, "method", "exact").split(",")]
    for m in methods:
        if m not in STATIONARY_METHODS:
            raise SystemExit(f"error: unknown method {m!r} (choose from {STATIONARY_METHODS})")
    seed = _resolve_seed(args, "monte-carlo" in methods)
    sim = _resolve_sim(args, seed)
    start_state = _resolve_start(args)

    dists = {m: _stationary_by_method(payoff, n, mu, m, sim, start_state)
             for m in methods}
    diagnostics = {}
    if "exact" in dists:
        for m, dist in dists.items():
            if m != "exact":
                tv = chain.total_variation(dists["exact"], dist)
                diagnostics[f"tv_exact_vs_{m.replace('-', '_')}"] = tv
                print(f"tv exact vs {m}: {tv:.6f}", file=sys.stderr)

    header = ["i", "x", "prob", "method"]
    rows = []
    for m in methods:
        probs = dists[m].probs
        rows.extend((i, i / n, probs[i], m) for i in range(n + 1))
    fmt = _resolve(args, "format", "csv")
    cfg = _config_dict(payoff, N=n, mu=mu, method=",".join(methods),
                       rounds=sim.rounds, burn_in=sim.burn_in,
                       realizations=sim.realizations, seed=seed)
    if fmt == "json":
        payload = {
            "config": cfg,
            "diagnostics": diagnostics,
            "results": [
                {"method": m, "x": list(dists[m].x), "prob": list(dists[m].probs)}
                for m in methods
            ],
        }
        _emit(args.out, lambda s: json.dump(payload, s, indent=2))
    else:
        _emit(args.out, lambda s: _write_csv(s, header, rows))
    return 0


def cmd_bifurcation(args) -> int:
    payoff = _resolve_payoff(args)
    mu, grid = _resolve_mu(args)
    if grid is None:
        raise SystemExit("error: bifurcation needs --mu-grid lo:hi:step")
    mu_lo, mu_hi = grid[0], grid[-1]
    step = grid[1] - grid[0] if len(grid) > 1 else (mu_hi - mu_lo) or 1e-3
    diagram = deterministic.continue_diagram(payoff, mu_lo, mu_hi, step)
    regime = classify_regime(payoff)

    summary: dict = {
        "config": _config_dict(payoff, mu_lo=mu_lo, mu_hi=mu_hi, step=step),
        "regime": regime.value,
        "folds": [[m, x] for m, x in diagram.folds],
        "transcritical": [[m, x] for m, x in diagram.transcritical_points],
    }
    if regime.is_case1:
        crit = deterministic.critical_mus_case1(payoff)
        summary["mu1"] = crit.mu1
        summary["mu2"] = crit.mu2

    fmt = _resolve(args, "format", "csv")
    if fmt == "json":
        _emit(args.out, lambda s: json.dump(summary, s, indent=2))
    else:
        rows = []
        for bid, branch in enumerate(diagram.branches):
            rows.extend(
                (bid, m, x, st)
                for m, x, st in zip(branch.mus, branch.xs, branch.stabilities)
            )
        _emit(args.out, lambda s: _write_csv(s, ["branch_id", "mu", "x", "stability"], rows))
    return 0


def _mfpt_at(payoff, n, mu, methods, realizations, seed, round_cap):
    x_minus, x_zero, x_plus = deterministic.bistable_triple(payoff, mu)
    start, target = round(n * x_minus), round(n * x_plus)
    entry = {"mu": mu, "x_minus": x_minus, "x_zero": x_zero, "x_plus": x_plus,
             "reports": []}
    params = ChainParams(payoff, n, mu)
    for method in methods:
        if method == "exact":
            tau_m = chain.mfpt_exact(params, start, target)
            tau_p = chain.mfpt_exact(params, target, start)
            report = escape.EscapeReport("exact", tau_m, tau_p, None, None, 1.0)
            entry["reports"].append(report.to_dict())
        elif method == "monte-carlo":
            est_m = chain.estimate_fpt(params, start, target, realizations,
                                       seed, round_cap)
            est_p = chain.estimate_fpt(params, target, start, realizations,
                                       seed + 1, round_cap)
            report = escape.EscapeReport("monte_carlo", est_m.mean, est_p.mean,
                                         None, None, 1.0)
            rep = report.to_dict()
            rep["fpt_minus"] = est_m.to_dict()
            rep["fpt_plus"] = est_p.to_dict()
            entry["reports"].append(rep)
        elif method == "diffusion":
            entry["reports"].append(escape.mfpt_diffusion(payoff, mu, n).to_dict())
        elif method == "wkb":
            entry["reports"].append(escape.mfpt_wkb(payoff, mu, n).to_dict())
        else:
            raise SystemExit(f"error: unknown mfpt method {method!r}")
    return entry


def cmd_mfpt(args) -> int:
    payoff = _resolve_payoff(args)
    n = int(_resolve(args, "N"))
    mu, grid = _resolve_mu(args)
    mus = grid if grid is not None else [mu]
    methods = [m.strip() for m in _resolve(args, "method", "exact,diffusion,wkb").split(",")]
    for m in methods:
        if m not in MFPT_METHODS:
            raise SystemExit(f"error: unknown method {m!r} (choose from {MFPT_METHODS})")
    seed = _resolve_seed(args, "monte-carlo" in methods)
    realizations = int(_resolve(args, "realizations", 1000))
    round_cap = int(_resolve(args, "round-cap", chain.DEFAULT_ROUND_CAP))

    results = [_mfpt_at(payoff, n, m, methods, realizations, seed, round_cap)
               for m in mus]
    payload = {
        "config": _config_dict(payoff, N=n, mu=mu,
                               mu_grid=mus if grid is not None else None,
                               method=",".join(methods), seed=seed,
                               realizations=realizations, round_cap=round_cap),
        "results": results,
    }
    _emit(args.out, lambda s: json.dump(payload, s, indent=2))
    return 0


def cmd_quasi(args) -> int:
    payoff = _resolve_payoff(args)
    mu, _ = _resolve_mu(args, allow_grid=False)
    points = int(_resolve(args, "points", 401))
    x_minus, _, x_plus = deterministic.bistable_triple(payoff, mu)
    margin = min(x_minus, 1.0 - x_plus) * 0.5
    grid = np.linspace(margin, 1.0 - margin, points)
    table = escape.compare_quasipotentials(payoff, mu, grid)
    applicable, ok = escape.series_bound_check(payoff, mu, grid)
    bad = int(applicable.sum() - ok.sum())
    if bad:
        print(f"note: third-order bound exceeded at {bad} of "
              f"{int(applicable.sum())} applicable grid points "
              "(expected where q < 0.89)", file=sys.stderr)
    rows = zip(table["x"], table["phi"], table["psi"], table["diff"], table["q"])
    _emit(args.out, lambda s: _write_csv(s, ["x", "phi", "psi", "diff", "q"], rows))
    return 0


def cmd_sweep(args) -> int:
    payoff = _resolve_payoff(args)
    n = int(_resolve(args, "N"))
    _, grid = _resolve_mu(args)
    if grid is None:
        raise SystemExit("error: sweep needs --mu-grid lo:hi:step")
    kind = _resolve(args, "kind", "heatmap")
    exact = bool(_resolve(args, "exact", False))
    seed = _resolve_seed(args, not exact)
    sim = _resolve_sim(args, seed)
    start_state = _resolve_start(args)

    if kind == "heatmap":
        matrix = chain.heatmap(payoff, n, grid, sim, exact=exact,
                               start_state=start_state)
        header = ["x"] + [_fmt(m) for m in grid]
        rows = [(i / n, *matrix[i]) for i in range(n + 1)]
        _emit(args.out, lambda s: _write_csv(s, header, rows))
        return 0
    if kind == "moments":
        rows = _moment_sweep_rows(payoff, n, grid, sim, exact, start_state)
        header = ["mu", "basin", "x_star", "mean_sim", "var_sim", "var_lna",
                  "mean_corrected", "var_corrected", "single_equilibrium"]
        _emit(args.out, lambda s: _write_csv(s, header, rows))
        return 0
    raise SystemExit(f"error: unknown sweep kind {kind!r}")


def _moment_sweep_rows(payoff, n, grid, sim, exact, start_state):
    """Conditional moments per basin vs mu, with LNA/corrected predictions.

    Basins are delimited by the unstable equilibrium; in the single-mixture
    regime the full range is reported on the x_minus row (flagged), matching
    the convention used for the variance figures.
    """
    rows = []
    for mu in grid:
        params = ChainParams(payoff, n, mu)
        if exact:
            dist = chain.stationary_exact(params)
        else:
            dist = chain.simulate(params, sim, start_state)
        fps = deterministic.fixed_points(payoff, mu)
        stable = [fp for fp in fps if fp.stability == "stable"]
        if len(fps) == 3 and len(stable) == 2:
            split = int(np.floor(fps[1].x * n))
            windows = [("minus", stable[0].x, (0, split)),
                       ("plus", stable[1].x, (split + 1, n))]
            single = 0
        else:
            windows = [("minus", stable[0].x, (0, n))]
            single = 1
        for basin, x_star, window in windows:
            mean_sim, var_sim, _ = chain.distribution_moments(dist, window)
            lna = moments.lna_variance(payoff, mu, n, x_star)
            corr = moments.corrected_moments(payoff, mu, n, x_star)
            rows.append((mu, basin, x_star, mean_sim, var_sim, lna.variance,
                         corr.mean, corr.variance, single))
    return rows


# -- parser ----------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its entries")
    parser.add_argument("--payoff", help="payoff matrix as a,b,c,d")
    parser.add_argument("--N", type=int, help="population size")
    parser.add_argument("--mu", type=float, help="mutation probability in (0,1)")
    parser.add_argument("--mu-grid", help="mutation grid lo:hi:step")
    parser.add_argument("--rounds", type=int, help=f"rounds per realization (default {DEFAULT_ROUNDS})")
    parser.add_argument("--burn-in", type=int, help=f"burn-in rounds (default {DEFAULT_BURN_IN})")
    parser.add_argument("--realizations", type=int, help="Monte Carlo ensemble size")
    parser.add_argument("--seed", type=int, help="RNG seed (default logged)")
    parser.add_argument("--start-state",
                        help="initial state: an integer or 'stratified' (default round(N/2))")
    parser.add_argument("--method", help="comma-separated method list")
    parser.add_argument("--format", choices=["csv", "json"], help="output format")
    parser.add_argument("--out", help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moranswitch",
        description="Two-strategy Moran process with mutation: exact solvers, "
                    "Monte Carlo, bifurcations, and switching-time asymptotics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates", help="dump w±(i) and Omega±(i/N) tables")
    _add_common(p)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("stationary", help="stationary distribution (exact | diffusion | monte-carlo)")
    _add_common(p)
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("bifurcation", help="equilibrium branches, critical mus, folds")
    _add_common(p)
    p.set_defaults(func=cmd_bifurcation)

    p = sub.add_parser("mfpt", help="switching times (exact | diffusion | wkb | monte-carlo)")
    _add_common(p)
    p.add_argument("--round-cap", type=int, help="abort Monte Carlo realizations beyond this many rounds")
    p.set_defaults(func=cmd_mfpt)

    p = sub.add_parser("quasi", help="quasipotential comparison table (x, phi, psi, diff, q)")
    _add_common(p)
    p.add_argument("--points", type=int, help="grid resolution (default 401)")
    p.set_defaults(func=cmd_quasi)

    p = sub.add_parser("sweep", help="mu-grid heatmap or moment curves")
    _add_common(p)
    p.add_argument("--kind", choices=["heatmap", "moments"], help="sweep output kind")
    p.add_argument("--exact", action="store_true", default=None,
                   help="use the detailed-balance stationary law instead of Monte Carlo")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args._config = _load_config(args.config)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except chain.RoundCapExceeded as exc:
        diag = {"error": "round_cap_exceeded", "cap": exc.cap,
                "completed": exc.completed, "requested": exc.requested,
                "partial": exc.partial.to_dict() if exc.partial else None}
        print(json.dumps(diag), file=sys.stderr)
        return 1
    except escape.QuadratureError as exc:
        print(json.dumps({"error": "quadrature", "detail": str(exc)}), file=sys.stderr)
        return 1
    except (ValueError, deterministic.NotBistableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
