"""Command-line experiment runner producing deterministic CSV tables.

Usage:

    illumina <subcommand> [--config FILE] [--out FILE] [--threads K] [--seed S]

Subcommands ``fig2`` .. ``fig6`` reproduce the library's standard figure
tables (QFI ratios and comparisons, optimal signal fractions, SNR
equivalence), ``bounds`` tabulates discrimination bounds, ``mc`` runs the
Monte-Carlo threshold detector, and ``qfi`` / ``snr`` evaluate single
points.

Configuration is a TOML file with one table per subcommand; only the
table matching the invoked subcommand is consumed, every key is
validated, and unknown tables or keys are rejected (exit code 2).
``--seed`` overrides the table's seed, ``--threads`` parallelizes
independent grid cells (row order never depends on scheduling).  Output
is RFC-4180 CSV preceded by ``#`` comment lines recording the library
version, the effective configuration and its hash, the truncation
policy, and residual tail masses — and never a timestamp, so reruns are
byte-identical.  Exit codes: 0 success, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .channel import ChannelParams, apply_channel, drho_deta_at_zero
from .measurement import (
    outcome_pmf,
    p_err_gaussian,
    p_err_gaussian_threshold,
    simulate_detection,
    snr,
    snr_coherent_closed,
)
from .metrology import (
    bhattacharyya,
    chernoff,
    error_bounds_from_qfi,
    fidelity,
    fidelity_error_bounds,
    helstrom_error,
    qfi_at_zero,
    qfi_coherent_closed,
    qfi_product_fast,
)
from .optimize import (
    OptimOptions,
    energy_fraction_sweep,
    optimize_npe_qfi,
    optimize_npe_snr,
)
from .states import (
    CoherentProbe,
    NpeState,
    TruncationOverflowError,
    TruncationPolicy,
    coherent_pair,
    npe_vector,
    tmsv_vector,
)

DEFAULT_NTH_GRID = [0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0]


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


# ---------------------------------------------------------------------------
# Config schema
# ---------------------------------------------------------------------------


def _as_float(key, lo=None, hi=None):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{key} must be a number, got {v!r}")
        x = float(v)
        if lo is not None and x < lo:
            raise ConfigError(f"{key} must be >= {lo}, got {x}")
        if hi is not None and x > hi:
            raise ConfigError(f"{key} must be <= {hi}, got {x}")
        return x

    return check


def _as_int(key, lo=None):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{key} must be an integer, got {v!r}")
        if lo is not None and v < lo:
            raise ConfigError(f"{key} must be >= {lo}, got {v}")
        return int(v)

    return check


def _as_grid(key, element, lo=None):
    item = _as_float(key, lo=lo) if element is float else _as_int(key, lo=lo)

    def check(v):
        if not isinstance(v, list) or not v:
            raise ConfigError(f"{key} must be a nonempty list")
        vals = [item(x) for x in v]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError(f"{key} must be strictly ascending, got {vals}")
        return vals

    return check


def _as_str(key, choices=None):
    def check(v):
        if not isinstance(v, str):
            raise ConfigError(f"{key} must be a string, got {v!r}")
        if choices is not None and v not in choices:
            raise ConfigError(f"{key} must be one of {sorted(choices)}, got {v!r}")
        return v

    return check


def _as_bool(key):
    def check(v):
        if not isinstance(v, bool):
            raise ConfigError(f"{key} must be a boolean, got {v!r}")
        return v

    return check


def _as_float_list(key):
    item = _as_float(key)

    def check(v):
        if not isinstance(v, list) or not v:
            raise ConfigError(f"{key} must be a nonempty list")
        return [item(x) for x in v]

    return check


_OPT_KEYS = {
    "seed": (7, _as_int("seed", lo=0)),
    "starts": (20, _as_int("starts", lo=0)),
}
_POLICY_KEYS = {
    "tail_tol": (1e-12, _as_float("tail_tol", lo=0.0, hi=1e-2)),
    "max_dim": (4096, _as_int("max_dim", lo=2)),
}

SCHEMAS: dict[str, dict] = {
    "fig2": {
        "n_th_grid": (DEFAULT_NTH_GRID, _as_grid("n_th_grid", float, lo=0.0)),
        **_OPT_KEYS,
    },
    "fig3": {
        "n_th_grid": (DEFAULT_NTH_GRID, _as_grid("n_th_grid", float, lo=0.0)),
        **_OPT_KEYS,
        **_POLICY_KEYS,
    },
    "fig4": {
        "n_grid": (list(range(1, 21)), _as_grid("n_grid", int, lo=1)),
        "n_th_grid": (DEFAULT_NTH_GRID, _as_grid("n_th_grid", float, lo=0.0)),
        **_OPT_KEYS,
    },
    "fig5": {
        "n_grid": ([2, 4, 10, 20, 30, 40], _as_grid("n_grid", int, lo=1)),
        "n_th_grid": (DEFAULT_NTH_GRID, _as_grid("n_th_grid", float, lo=0.0)),
        "cache_dir": (None, _as_str("cache_dir")),
        **_OPT_KEYS,
    },
    "fig6": {
        "n_th_grid": (DEFAULT_NTH_GRID, _as_grid("n_th_grid", float, lo=0.0)),
        "eta": (0.01, _as_float("eta", lo=0.0, hi=1.0)),
        **_OPT_KEYS,
    },
    "bounds": {
        "n_th_grid": ([0.5, 1.0, 2.0], _as_grid("n_th_grid", float, lo=0.0)),
        "m_grid": ([1, 10, 100], _as_grid("m_grid", int, lo=1)),
        "eta": (0.05, _as_float("eta", lo=0.0, hi=1.0)),
        **_OPT_KEYS,
        **_POLICY_KEYS,
    },
    "mc": {
        "m_grid": ([500, 1000, 2000], _as_grid("m_grid", int, lo=1)),
        "trials": (100000, _as_int("trials", lo=1)),
        "eta": (0.1, _as_float("eta", lo=0.0, hi=1.0)),
        "n_th": (1.0, _as_float("n_th", lo=0.0)),
        "alpha": (1.0, _as_float("alpha")),
        "beta": (1.0, _as_float("beta")),
        "include_control": (True, _as_bool("include_control")),
        "seed": (20240817, _as_int("seed", lo=0)),
        **_POLICY_KEYS,
    },
    "qfi": {
        "probe": ("npe", _as_str("probe", {"npe", "coherent", "tmsv"})),
        "method": ("fast", _as_str("method", {"fast", "generic"})),
        "n": (4, _as_int("n", lo=1)),
        "coeffs": (None, _as_float_list("coeffs")),
        "alpha": (1.0, _as_float("alpha")),
        "beta": (0.0, _as_float("beta")),
        "n_s": (1.0, _as_float("n_s", lo=0.0)),
        "n_th": (1.0, _as_float("n_th", lo=0.0)),
        **_OPT_KEYS,
        **_POLICY_KEYS,
    },
    "snr": {
        "probe": ("npe", _as_str("probe", {"npe", "coherent"})),
        "n": (4, _as_int("n", lo=1)),
        "coeffs": (None, _as_float_list("coeffs")),
        "alpha": (1.0, _as_float("alpha")),
        "beta": (1.0, _as_float("beta")),
        "theta": (0.0, _as_float("theta")),
        "eta": (0.1, _as_float("eta", lo=0.0, hi=1.0)),
        "n_th": (1.0, _as_float("n_th", lo=0.0)),
        **_OPT_KEYS,
        **_POLICY_KEYS,
    },
}


def load_config(sub: str, path: str | None, seed_override: int | None) -> dict:
    """Read, validate, and default-fill the table for one subcommand."""
    data: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
    for table, value in data.items():
        if table not in SCHEMAS:
            raise ConfigError(f"unknown config table [{table}]")
        if not isinstance(value, dict):
            raise ConfigError(f"top-level key {table!r} must be a table")
        unknown = set(value) - set(SCHEMAS[table])
        if unknown:
            raise ConfigError(f"unknown keys in [{table}]: {sorted(unknown)}")
    schema = SCHEMAS[sub]
    raw = data.get(sub, {})
    cfg = {}
    for key, (default, check) in schema.items():
        if key in raw:
            cfg[key] = check(raw[key])
        else:
            cfg[key] = list(default) if isinstance(default, list) else default
    if seed_override is not None:
        if "seed" not in schema:
            raise ConfigError(f"subcommand {sub!r} takes no seed")
        cfg["seed"] = _as_int("seed", lo=0)(seed_override)
    return cfg


def _policy(cfg: dict) -> TruncationPolicy:
    if "tail_tol" in cfg:
        return TruncationPolicy(tail_tol=cfg["tail_tol"], max_dim=cfg["max_dim"])
    return TruncationPolicy()


def _opts(cfg: dict, warm: tuple = ()) -> OptimOptions:
    return OptimOptions(starts=cfg["starts"], seed=cfg["seed"], warm=warm)


def _pool_map(fn, items: list, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Subcommand handlers: cfg -> (columns, rows, meta)
# ---------------------------------------------------------------------------


def run_fig2(cfg: dict, threads: int):
    def cell(n_th: float):
        res = optimize_npe_qfi(4, n_th, _opts(cfg))
        return [
            n_th,
            res.objective / qfi_coherent_closed(2.0, n_th),
            res.objective / qfi_coherent_closed(4.0, n_th),
            int(res.converged),
        ]

    rows = _pool_map(cell, cfg["n_th_grid"], threads)
    meta = {"thermal_series_tol": "1e-18"}
    return ["n_th", "ratio_vs_sqrt2sqrt2", "ratio_vs_20", "converged"], rows, meta


def run_fig3(cfg: dict, threads: int):
    policy = _policy(cfg)
    tails = []

    def cell(n_th: float):
        res = optimize_npe_qfi(4, n_th, _opts(cfg))
        n_s = res.n_signal
        tmsv = tmsv_vector(n_s, policy) if n_s > 0 else None
        if tmsv is not None:
            tails.append(tmsv.tail)
            f_tmsv = qfi_product_fast(tmsv, n_th, policy).f_q
        else:
            f_tmsv = 0.0
        return [n_th, res.objective, qfi_coherent_closed(n_s, n_th), f_tmsv, n_s]

    rows = _pool_map(cell, cfg["n_th_grid"], threads)
    meta = {"tail_mass_max": _fmt_float(max(tails) if tails else 0.0)}
    return ["n_th", "f_q_npe4", "f_q_coherent", "f_q_tmsv", "n_s_opt"], rows, meta


def run_fig4(cfg: dict, threads: int):
    cells = [(n, n_th) for n in cfg["n_grid"] for n_th in cfg["n_th_grid"]]

    def cell(pair):
        n, n_th = pair
        res = optimize_npe_qfi(n, n_th, _opts(cfg))
        f_coh = qfi_coherent_closed(float(n), n_th)
        return [n, n_th, f_coh, res.objective, (f_coh - res.objective) / n]

    rows = _pool_map(cell, cells, threads)
    meta = {"thermal_series_tol": "1e-18"}
    return ["n", "n_th", "f_q_coherent", "f_q_npe", "gap_over_n"], rows, meta


def run_fig5(cfg: dict, threads: int):
    def chain(n: int):
        return energy_fraction_sweep(
            [n],
            cfg["n_th_grid"],
            objective="qfi",
            opts=_opts(cfg),
            cache_dir=cfg["cache_dir"],
        )

    chains = _pool_map(chain, cfg["n_grid"], threads)
    rows = [[row.n, row.n_th, row.fraction] for chain_rows in chains for row in chain_rows]
    meta = {"thermal_series_tol": "1e-18"}
    return ["n", "n_th", "fraction"], rows, meta


def run_fig6(cfg: dict, threads: int):
    eta = cfg["eta"]

    def cell(n_th: float):
        res = optimize_npe_snr(4, eta, n_th, _opts(cfg))
        coherent = snr_coherent_closed(4.0, res.n_signal, 0.0, eta, n_th)
        return [n_th, res.objective, coherent, abs(res.objective - coherent)]

    rows = _pool_map(cell, cfg["n_th_grid"], threads)
    meta = {"eta": _fmt_float(eta)}
    return ["n_th", "snr_npe4", "snr_coherent", "abs_diff"], rows, meta


def run_bounds(cfg: dict, threads: int):
    policy = _policy(cfg)
    eta = cfg["eta"]
    tails = []

    def cell(pair):
        state, n_th = pair
        res = optimize_npe_qfi(4, n_th, _opts(cfg))
        if state == "npe4":
            probe = npe_vector(NpeState(4, res.coeffs))
            f_q = res.objective
        else:
            n_s = res.n_signal
            probe = coherent_pair(math.sqrt(n_s), 0.0, policy)
            f_q = qfi_coherent_closed(n_s, n_th)
        rho0 = apply_channel(probe, ChannelParams(0.0, n_th, policy))
        rho1 = apply_channel(probe, ChannelParams(eta, n_th, policy))
        tails.append(max(rho0.tail, rho1.tail))
        fid = fidelity(rho0, rho1)
        hel = helstrom_error(rho0, rho1)
        q, s_star = chernoff(rho0, rho1)
        bha = bhattacharyya(rho0, rho1)
        out = []
        for m in cfg["m_grid"]:
            qb = error_bounds_from_qfi(f_q, eta, m)
            fid_lo, fid_hi = fidelity_error_bounds(fid, m)
            out.append(
                [
                    state,
                    n_th,
                    m,
                    eta,
                    f_q,
                    qb.lower,
                    qb.upper,
                    fid,
                    fid_lo,
                    fid_hi,
                    hel,
                    q,
                    s_star,
                    bha,
                ]
            )
        return out

    cells = [(state, n_th) for state in ("npe4", "coherent") for n_th in cfg["n_th_grid"]]
    groups = _pool_map(cell, cells, threads)
    rows = [row for group in groups for row in group]
    meta = {"tail_mass_max": _fmt_float(max(tails) if tails else 0.0)}
    columns = [
        "state",
        "n_th",
        "m",
        "eta",
        "f_q",
        "qfi_lower",
        "qfi_upper",
        "fidelity",
        "fid_lower",
        "fid_upper",
        "helstrom_single",
        "chernoff_q",
        "chernoff_s_star",
        "bhattacharyya",
    ]
    return columns, rows, meta


def run_mc(cfg: dict, threads: int):
    policy = _policy(cfg)
    probe = coherent_pair(cfg["alpha"], cfg["beta"], policy)
    pmf0 = outcome_pmf(probe, 0.0, cfg["n_th"], policy)
    pmf1 = outcome_pmf(probe, cfg["eta"], cfg["n_th"], policy)
    snr_val = snr(probe, cfg["eta"], cfg["n_th"]).snr
    rows = []
    for m in cfg["m_grid"]:
        p_hat, stderr = simulate_detection(pmf0, pmf1, m, cfg["trials"], cfg["seed"])
        rows.append(
            [
                "signal",
                m,
                snr_val,
                p_hat,
                stderr,
                p_err_gaussian_threshold(snr_val, m),
                p_err_gaussian(snr_val, m),
            ]
        )
    if cfg["include_control"]:
        for m in cfg["m_grid"]:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                p_hat, stderr = simulate_detection(pmf0, pmf0, m, cfg["trials"], cfg["seed"] + 1)
            rows.append(["control", m, 0.0, p_hat, stderr, 0.5, 1.0])
    meta = {"tail_mass_max": _fmt_float(max(pmf0.tail, pmf1.tail))}
    columns = ["case", "m", "snr", "p_err_hat", "stderr", "gaussian_prediction", "envelope"]
    return columns, rows, meta


def _config_npe(n: int, coeffs: list[float]) -> NpeState:
    if len(coeffs) != n + 1:
        raise ConfigError(f"coeffs must have {n + 1} entries for n={n}, got {len(coeffs)}")
    arr = np.asarray(coeffs, dtype=float)
    if not np.linalg.norm(arr) > 0:
        raise ConfigError("coeffs must not all be zero")
    return NpeState(n, arr)


def _qfi_probe(cfg: dict, policy: TruncationPolicy):
    if cfg["probe"] == "npe":
        if cfg["coeffs"] is not None:
            return _config_npe(cfg["n"], cfg["coeffs"])
        return NpeState(cfg["n"], optimize_npe_qfi(cfg["n"], cfg["n_th"], _opts(cfg)).coeffs)
    if cfg["probe"] == "coherent":
        return CoherentProbe(cfg["alpha"], cfg["beta"])
    return tmsv_vector(cfg["n_s"], policy)


def run_qfi(cfg: dict, threads: int):
    del threads
    policy = _policy(cfg)
    probe = _qfi_probe(cfg, policy)
    tail = getattr(probe, "tail", 0.0)
    if cfg["method"] == "fast":
        rep = qfi_product_fast(probe, cfg["n_th"], policy)
    else:
        vec = probe
        if isinstance(probe, NpeState):
            vec = npe_vector(probe)
        elif isinstance(probe, CoherentProbe):
            vec = coherent_pair(probe.alpha, probe.beta, policy)
        rho0 = apply_channel(vec, ChannelParams(0.0, cfg["n_th"], policy))
        drho = drho_deta_at_zero(vec, cfg["n_th"], policy)
        rep = qfi_at_zero(rho0, drho)
        tail = max(tail, rho0.tail)
    rows = [[cfg["probe"], cfg["n_th"], rep.method, rep.f_q, rep.support_dim]]
    meta = {"tail_mass_max": _fmt_float(float(tail))}
    return ["probe", "n_th", "method", "f_q", "support_dim"], rows, meta


def run_snr(cfg: dict, threads: int):
    del threads
    policy = _policy(cfg)
    if cfg["probe"] == "npe":
        if cfg["coeffs"] is not None:
            state = _config_npe(cfg["n"], cfg["coeffs"])
        else:
            state = NpeState(
                cfg["n"], optimize_npe_snr(cfg["n"], cfg["eta"], cfg["n_th"], _opts(cfg)).coeffs
            )
        vec = npe_vector(state)
    else:
        beta = cfg["beta"] * complex(math.cos(cfg["theta"]), math.sin(cfg["theta"]))
        vec = coherent_pair(cfg["alpha"], beta, policy)
    rep = snr(vec, cfg["eta"], cfg["n_th"])
    rows = [
        [
            cfg["probe"],
            cfg["eta"],
            cfg["n_th"],
            rep.snr,
            rep.moments.mean1,
            rep.moments.sigma0,
            rep.moments.sigma1,
            rep.moments.threshold,
            int(rep.degenerate),
        ]
    ]
    meta = {"tail_mass_max": _fmt_float(float(vec.tail))}
    columns = ["probe", "eta", "n_th", "snr", "mean1", "sigma0", "sigma1", "threshold", "degenerate"]
    return columns, rows, meta


HANDLERS = {
    "fig2": run_fig2,
    "fig3": run_fig3,
    "fig4": run_fig4,
    "fig5": run_fig5,
    "fig6": run_fig6,
    "bounds": run_bounds,
    "mc": run_mc,
    "qfi": run_qfi,
    "snr": run_snr,
}


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    return f"{x:.11e}"


def _fmt_cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _fmt_float(float(v))
    return str(v)


def _config_hash(sub: str, cfg: dict) -> str:
    payload = json.dumps({"subcommand": sub, "config": cfg}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def render_csv(sub: str, cfg: dict, columns: list[str], rows: list[list], meta: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# illumina {__version__}\n")
    buf.write(f"# subcommand: {sub}\n")
    buf.write(f"# config_sha256: {_config_hash(sub, cfg)}\n")
    if "tail_tol" in cfg:
        buf.write(f"# policy: tail_tol={cfg['tail_tol']!r} max_dim={cfg['max_dim']}\n")
    else:
        buf.write("# policy: tail_tol=1e-12 max_dim=4096\n")
    for key in sorted(cfg):
        buf.write(f"# cfg {key} = {json.dumps(cfg[key])}\n")
    for key in sorted(meta):
        buf.write(f"# {key}: {meta[key]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt_cell(v) for v in row])
    return buf.getvalue()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="illumina",
        description="Deterministic CSV tables for entangled-probe target detection.",
    )
    parser.add_argument("subcommand", choices=sorted(HANDLERS))
    parser.add_argument("--config", default=None, help="TOML config file")
    parser.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for grid cells")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    args = parser.parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.subcommand, args.config, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        columns, rows, meta = HANDLERS[args.subcommand](cfg, args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError, TruncationOverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    text = render_csv(args.subcommand, cfg, columns, rows, meta)
    if args.out is None:
        sys.stdout.write(text)
    else:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
