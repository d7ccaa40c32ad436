"""Command-line surface: simulate, fit, summarize, validate.

Configuration comes from an optional JSON file plus flag overrides (flags
win). Exit codes: 0 success, 1 validation failure, 2 input error. The
environment variable HIERMIRT_THREADS caps how many chains run in
parallel (0 or unset means automatic).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import io as hio
from .diagnostics import averaged_general_trait, rmse, summarize
from .model import TraitLoadings
from .sampler.chain import ChainTrace, SamplerConfig, run_chain
from .simulate import preset_design, simulate_dataset
from .validate import run_all_checks


class ConfigError(ValueError):
    """Configuration file or flag problem; maps to exit code 2."""


@dataclass
class RunConfig:
    """Flat run configuration shared by the config file and the manifest."""

    command: str | None = None
    dataset: str | None = None
    items: str | None = None
    hierarchy: str | None = None
    truth: str | None = None
    fit_dir: str | None = None
    out: str | None = None
    preset: int | None = None
    iterations: int = 2000
    burnin: int | None = None
    thin: int = 1
    seed: int = 0
    chains: int = 1
    estimate_items: bool = True
    estimate_guessing: bool = True
    estimate_lambda: bool = True
    fixed_lambda: list | None = None
    store_theta: list | None = None
    ab_prior_mean_a: float = 1.0
    ab_prior_mean_b: float = 0.0
    ab_prior_var: float = 4.0
    ag_prior_mean: float = 1.0
    ag_prior_var: float = 4.0
    c_prior_alpha: float = 1.0
    c_prior_beta: float = 4.0
    lambda_step: float = 0.1
    bg_translate_step: float = 0.2
    bg_diff_step: float = 0.2
    adapt_window: int = 50


_BOOL_KEYS = {"estimate_items", "estimate_guessing", "estimate_lambda"}
_INT_KEYS = {"preset", "iterations", "burnin", "thin", "seed", "chains", "adapt_window"}
_FLOAT_KEYS = {
    "ab_prior_mean_a", "ab_prior_mean_b", "ab_prior_var", "ag_prior_mean",
    "ag_prior_var", "c_prior_alpha", "c_prior_beta", "lambda_step",
    "bg_translate_step", "bg_diff_step",
}
_STR_KEYS = {"command", "dataset", "items", "hierarchy", "truth", "fit_dir", "out"}
_LIST_KEYS = {"fixed_lambda", "store_theta"}
_ALL_KEYS = _BOOL_KEYS | _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _LIST_KEYS


def _coerce(key: str, value):
    if value is None:
        return None
    try:
        if key in _BOOL_KEYS:
            if isinstance(value, bool):
                return value
            raise TypeError("expected true/false")
        if key in _INT_KEYS:
            if isinstance(value, bool) or (not isinstance(value, int) and int(value) != value):
                raise TypeError("expected an integer")
            return int(value)
        if key in _FLOAT_KEYS:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError("expected a number")
            return float(value)
        if key in _STR_KEYS:
            if not isinstance(value, str):
                raise TypeError("expected a string")
            return value
        if key in _LIST_KEYS:
            if not isinstance(value, list):
                raise TypeError("expected a list")
            return value
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key}: {exc}") from exc
    raise ConfigError(f"unknown config key: {key}")


def parse_config(config_path: str | None, overrides: dict) -> RunConfig:
    """Merge a JSON config file with flag overrides (overrides win)."""
    merged: dict = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path}: top level must be an object")
        for key, value in raw.items():
            if key not in _ALL_KEYS:
                raise ConfigError(f"unknown config key: {key}")
            merged[key] = _coerce(key, value)
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown config key: {key}")
        merged[key] = _coerce(key, value)
    return RunConfig(**merged)


def _require(cfg: RunConfig, keys: list[str], command: str) -> None:
    missing = [k for k in keys if getattr(cfg, k) is None]
    if missing:
        raise ConfigError(f"{command}: missing required config key(s): {', '.join(missing)}")


def _sampler_config(cfg: RunConfig, seed: int) -> SamplerConfig:
    store = tuple(int(s) - 1 for s in (cfg.store_theta or ()))
    return SamplerConfig(
        iterations=cfg.iterations,
        burn_in=cfg.burnin,
        thin=cfg.thin,
        seed=seed,
        estimate_items=cfg.estimate_items,
        estimate_guessing=cfg.estimate_guessing,
        estimate_lambda=cfg.estimate_lambda,
        ab_prior_mean_a=cfg.ab_prior_mean_a,
        ab_prior_mean_b=cfg.ab_prior_mean_b,
        ab_prior_var=cfg.ab_prior_var,
        ag_prior_mean=cfg.ag_prior_mean,
        ag_prior_var=cfg.ag_prior_var,
        c_prior_alpha=cfg.c_prior_alpha,
        c_prior_beta=cfg.c_prior_beta,
        lambda_step=cfg.lambda_step,
        bg_translate_step=cfg.bg_translate_step,
        bg_diff_step=cfg.bg_diff_step,
        adapt_window=cfg.adapt_window,
        store_theta=store,
    )


def _config_payload(cfg: RunConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}


def _thread_cap() -> int:
    raw = os.environ.get("HIERMIRT_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ConfigError(f"HIERMIRT_THREADS must be an integer, got {raw!r}") from exc
    return (os.cpu_count() or 1) if cap <= 0 else cap


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> int:
    _require(cfg, ["preset", "out"], "simulate")
    design = preset_design(cfg.preset)
    rng = np.random.default_rng(cfg.seed)
    data = simulate_dataset(design, rng)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    hio.write_dataset(out / "dataset.csv", data.responses)
    hio.write_items(out / "items.json", data.truth.items, with_params=False)
    hio.write_hierarchy(out / "hierarchy.json", design.hierarchy)
    hio.write_truth(out / "truth.json", data.truth.latent, data.truth.items, data.truth.loadings)
    fit_cfg = {
        "dataset": str(out / "dataset.csv"),
        "items": str(out / "items.json"),
        "hierarchy": str(out / "hierarchy.json"),
        "estimate_items": not design.fix_items_at_truth,
        "estimate_guessing": design.guessing_mode != "zero",
        "estimate_lambda": design.fit_lambda is None,
    }
    if design.fix_items_at_truth:
        fit_cfg["truth"] = str(out / "truth.json")
    if design.fit_lambda is not None:
        fit_cfg["fixed_lambda"] = [list(design.fit_lambda)]
    (out / "fit_config.json").write_text(json.dumps(fit_cfg, indent=1, sort_keys=True) + "\n")
    manifest = _config_payload(cfg)
    manifest["n_items"] = data.responses.n_items
    manifest["n_subjects"] = data.responses.n_subjects
    hio.write_manifest(out / "manifest.json", manifest)
    print(f"simulated preset {cfg.preset}: {data.responses.n_items} items x "
          f"{data.responses.n_subjects} subjects -> {out}")
    return 0


def _load_fit_inputs(cfg: RunConfig):
    bank = hio.read_items(cfg.items)
    hierarchy = hio.read_hierarchy(cfg.hierarchy)
    truth_loadings = None
    if cfg.truth is not None:
        _, truth_bank, truth_loadings = hio.read_truth(cfg.truth)
        if not cfg.estimate_items or not cfg.estimate_guessing:
            if truth_bank.n_items != bank.n_items:
                raise ConfigError("truth bundle item count does not match the item spec")
            bank = truth_bank
    responses = hio.read_dataset(cfg.dataset, bank)
    loadings = None
    if cfg.fixed_lambda is not None:
        loadings = TraitLoadings(tuple(np.asarray(v, dtype=float) for v in cfg.fixed_lambda))
    elif not cfg.estimate_lambda:
        if truth_loadings is None:
            raise ConfigError("estimate_lambda=false needs fixed_lambda or a truth bundle")
        loadings = truth_loadings
    return responses, bank, hierarchy, loadings


def _run_one_chain(args) -> ChainTrace:
    responses, bank, hierarchy, sampler_cfg, loadings = args
    return run_chain(responses, bank, hierarchy, sampler_cfg, loadings)


def _chain_manifest(cfg: RunConfig, trace: ChainTrace, seed: int) -> dict:
    payload = _config_payload(cfg)
    payload.update(
        seed=seed,
        n_kept=trace.n_kept,
        acceptance_rates=trace.accept_rates,
        step_scales=trace.step_scales,
        timing={"fit_seconds": trace.runtime_seconds},
    )
    return payload


def cmd_fit(cfg: RunConfig) -> int:
    _require(cfg, ["dataset", "items", "hierarchy", "out"], "fit")
    responses, bank, hierarchy, loadings = _load_fit_inputs(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [cfg.seed + i for i in range(cfg.chains)]
    jobs = [
        (responses, bank, hierarchy, _sampler_config(cfg, seed), loadings)
        for seed in seeds
    ]
    width = min(len(jobs), _thread_cap())
    if len(jobs) > 1 and width > 1:
        with ProcessPoolExecutor(max_workers=width) as pool:
            traces = list(pool.map(_run_one_chain, jobs))
    else:
        traces = [_run_one_chain(job) for job in jobs]

    if cfg.chains == 1:
        trace = traces[0]
        hio.write_trace(out, trace)
        hio.write_manifest(out / "manifest.json", _chain_manifest(cfg, trace, seeds[0]))
    else:
        for i, trace in enumerate(traces):
            sub = out / f"chain_{i:02d}"
            sub.mkdir(exist_ok=True)
            hio.write_trace(sub, trace)
            hio.write_manifest(sub / "manifest.json", _chain_manifest(cfg, trace, seeds[i]))
        top = _config_payload(cfg)
        top["chain_dirs"] = [f"chain_{i:02d}" for i in range(cfg.chains)]
        hio.write_manifest(out / "manifest.json", top)
    if traces[0].n_kept == 0:
        print("warning: no post-burn-in draws were kept (iterations == burnin)")
    print(f"fit complete: {cfg.chains} chain(s), {traces[0].n_kept} kept draws -> {out}")
    return 0


def cmd_summarize(cfg: RunConfig) -> int:
    _require(cfg, ["fit_dir", "out"], "summarize")
    fit_dir = Path(cfg.fit_dir)
    if not (fit_dir / "manifest.json").exists():
        raise ConfigError(f"no manifest.json under {fit_dir}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for group in ("lambda", "dich_a", "dich_b", "guessing", "graded_a", "graded_b", "theta"):
        path = fit_dir / f"trace_{group}.csv"
        if not path.exists():
            continue
        tg = hio.read_trace_group(fit_dir, group)
        if tg.draws.shape[0] < 2:
            continue
        for pos, name in enumerate(tg.names):
            s = summarize(tg.draws[:, pos])
            rows.append(
                {"parameter": name, "mean": s.mean, "sd": s.sd,
                 "ci_low": s.ci_low, "ci_high": s.ci_high, "ci_range": s.ci_range}
            )
    hio.write_summary(out / "summary.csv", rows)

    if cfg.truth is not None:
        latent, _, _ = hio.read_truth(cfg.truth)
        theta_mean = hio.read_theta_mean(fit_dir)
        rmse_rows, scatter = [], []
        for k, est in enumerate(theta_mean):
            for q in range(est.shape[0]):
                truth_row = latent.traits[k][q]
                rmse_rows.append(
                    {"level": k + 1, "trait": q + 1, "rmse": rmse(est[q], truth_row)}
                )
                for j in range(est.shape[1]):
                    scatter.append((k + 1, q + 1, j + 1, truth_row[j], est[q, j]))
        if len(theta_mean) >= 2:
            baseline = averaged_general_trait(theta_mean[0])
            for q in range(latent.traits[1].shape[0]):
                rmse_rows.append(
                    {"level": 2, "trait": f"level1_average_vs_t{q + 1}",
                     "rmse": rmse(baseline, latent.traits[1][q])}
                )
        hio.write_rmse_report(out / "rmse.csv", rmse_rows)
        hio.write_scatter(out / "scatter.csv", scatter)
    print(f"summary written: {len(rows)} parameters -> {out}")
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    results = run_all_checks(cfg.seed)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--preset", type=int)
    p.add_argument("--out")
    p.add_argument("--chains", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiermirt",
        description="Hierarchical multidimensional IRT: simulate, fit, summarize, validate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, extra in (
        ("simulate", []),
        ("fit", ["dataset", "items", "hierarchy", "truth"]),
        ("summarize", ["fit_dir", "truth"]),
        ("validate", []),
    ):
        p = sub.add_parser(name)
        _add_common_flags(p)
        for flag in extra:
            p.add_argument(f"--{flag.replace('_', '-')}", dest=flag)
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "summarize": cmd_summarize,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        k: v for k, v in vars(args).items() if k not in ("config", "command")
    }
    try:
        cfg = parse_config(args.config, overrides)
        if cfg.command not in (None, args.command):
            raise ConfigError(
                f"config file says command={cfg.command!r} but {args.command!r} was invoked"
            )
        cfg.command = args.command
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
