"""File formats: dataset CSV, item/hierarchy/truth JSON, traces, manifests.

The dataset is a wide CSV (`subject,item_1,...,item_I`) with 0/1 cells for
dichotomous items, 0-based integer scores for graded items and empty
strings for missing cells. Structure files are JSON with 1-based trait
indices. Floats are written with repr, so a fixed-seed pipeline emits
byte-identical artifacts.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .model import (
    DICHOTOMOUS,
    GRADED,
    DichotomousItem,
    GradedItem,
    HierarchySpec,
    ItemBank,
    LatentState,
    ResponseMatrix,
    TraitLoadings,
    apply_echelon_restriction,
)
from .sampler.chain import ChainTrace, TraceGroup


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# Dataset CSV
# ---------------------------------------------------------------------------


def write_dataset(path, responses: ResponseMatrix) -> None:
    path = Path(path)
    n_items, n_subj = responses.n_items, responses.n_subjects
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject"] + [f"item_{i + 1}" for i in range(n_items)])
        vals = responses.values
        for j in range(n_subj):
            row = [str(j + 1)]
            for i in range(n_items):
                v = vals[i, j]
                row.append("" if np.isnan(v) else str(int(v)))
            writer.writerow(row)


def read_dataset(path, bank: ItemBank) -> ResponseMatrix:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "subject":
            raise ValueError(f"{path}: first column must be 'subject'")
        if len(header) - 1 != bank.n_items:
            raise ValueError(
                f"{path}: {len(header) - 1} item columns, item spec has {bank.n_items}"
            )
        columns = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: ragged row for subject {row[0]}")
            columns.append(
                [np.nan if cell == "" else float(cell) for cell in row[1:]]
            )
    if not columns:
        raise ValueError(f"{path}: no subjects")
    values = np.asarray(columns, dtype=float).T
    rm = ResponseMatrix.from_bank(values, bank)
    rm.validate()
    return rm


# ---------------------------------------------------------------------------
# Hierarchy and item-spec JSON
# ---------------------------------------------------------------------------


def hierarchy_to_dict(spec: HierarchySpec) -> dict:
    return {
        "levels": list(spec.trait_counts),
        "parents": [[p + 1 for p in row] for row in spec.parent],
    }


def hierarchy_from_dict(d: dict) -> HierarchySpec:
    try:
        levels = tuple(int(q) for q in d["levels"])
        parents = tuple(tuple(int(p) - 1 for p in row) for row in d.get("parents", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad hierarchy file: {exc}") from exc
    return HierarchySpec(levels, parents)


def write_hierarchy(path, spec: HierarchySpec) -> None:
    Path(path).write_text(json.dumps(hierarchy_to_dict(spec), indent=1) + "\n")


def read_hierarchy(path) -> HierarchySpec:
    return hierarchy_from_dict(json.loads(Path(path).read_text()))


def _item_to_dict(item, index: int, with_params: bool) -> dict:
    d = {
        "id": f"item_{index + 1}",
        "kind": item.kind,
        "loadings": [t + 1 for t in item.loadings],
    }
    if item.kind == GRADED:
        d["categories"] = item.n_categories
    if with_params:
        d["a"] = {str(t + 1): float(item.a[t]) for t in item.loadings}
        if item.kind == DICHOTOMOUS:
            d["b"] = float(item.b)
            d["c"] = float(item.c)
        else:
            d["thresholds"] = [float(t) for t in item.thresholds]
    return d


def bank_to_dict(bank: ItemBank, with_params: bool = True) -> dict:
    return {
        "n_traits": bank.n_traits,
        "items": [_item_to_dict(it, i, with_params) for i, it in enumerate(bank.items)],
    }


def bank_from_dict(d: dict) -> ItemBank:
    try:
        n_traits = int(d["n_traits"])
        specs = d["items"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad item spec: {exc}") from exc
    items = []
    for pos, s in enumerate(specs):
        kind = s.get("kind", DICHOTOMOUS)
        loadings = tuple(int(t) - 1 for t in s.get("loadings", []))
        if not loadings:
            raise ValueError(f"item {pos + 1}: empty loading set")
        if any(not 0 <= t < n_traits for t in loadings):
            raise ValueError(f"item {pos + 1}: loading outside 1..{n_traits}")
        a = np.zeros(n_traits)
        if "a" in s:
            for key, v in s["a"].items():
                a[int(key) - 1] = float(v)
        else:
            a[list(loadings)] = 1.0
        if kind == DICHOTOMOUS:
            items.append(
                DichotomousItem(
                    a, float(s.get("b", 0.0)), float(s.get("c", 0.0)), loadings, n_traits
                )
            )
        elif kind == GRADED:
            m = int(s.get("categories", 0))
            if "thresholds" in s:
                t = np.asarray(s["thresholds"], dtype=float)
                if m and t.size != m - 1:
                    raise ValueError(f"item {pos + 1}: {t.size} thresholds for {m} categories")
            else:
                if m < 2:
                    raise ValueError(f"item {pos + 1}: graded item needs 'categories' >= 2")
                t = np.linspace(-1.5, 1.5, m - 1)
            items.append(GradedItem(a, t, loadings, n_traits))
        else:
            raise ValueError(f"item {pos + 1}: unknown kind {kind!r}")
    bank = ItemBank(tuple(items), n_traits)
    if d.get("echelon_restriction", False):
        bank = apply_echelon_restriction(bank)
    return bank


def write_items(path, bank: ItemBank, with_params: bool = True) -> None:
    Path(path).write_text(json.dumps(bank_to_dict(bank, with_params), indent=1) + "\n")


def read_items(path) -> ItemBank:
    return bank_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Truth bundle
# ---------------------------------------------------------------------------


def truth_to_dict(latent: LatentState, bank: ItemBank, loadings: TraitLoadings) -> dict:
    return {
        "loadings": [[float(v) for v in lev] for lev in loadings.values],
        "items": bank_to_dict(bank, with_params=True),
        "theta": [lev.tolist() for lev in latent.traits],
    }


def truth_from_dict(d: dict) -> tuple[LatentState, ItemBank, TraitLoadings]:
    try:
        loadings = TraitLoadings(tuple(np.asarray(v, dtype=float) for v in d["loadings"]))
        bank = bank_from_dict(d["items"])
        latent = LatentState(tuple(np.asarray(t, dtype=float) for t in d["theta"]))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"bad truth bundle: {exc}") from exc
    return latent, bank, loadings


def write_truth(path, latent: LatentState, bank: ItemBank, loadings: TraitLoadings) -> None:
    Path(path).write_text(json.dumps(truth_to_dict(latent, bank, loadings)) + "\n")


def read_truth(path) -> tuple[LatentState, ItemBank, TraitLoadings]:
    return truth_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Traces, posterior means, manifests
# ---------------------------------------------------------------------------


def write_trace(out_dir, trace: ChainTrace) -> None:
    """One CSV per parameter group plus theta_mean.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for group, tg in trace.groups.items():
        with (out / f"trace_{group}.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(tg.names)
            for row in tg.draws:
                writer.writerow([_fmt(v) for v in row])
    with (out / "theta_mean.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "trait", "subject", "estimate"])
        for k, lev in enumerate(trace.theta_mean):
            for q in range(lev.shape[0]):
                for j in range(lev.shape[1]):
                    writer.writerow([k + 1, q + 1, j + 1, _fmt(lev[q, j])])


def read_trace_group(out_dir, group: str) -> TraceGroup:
    path = Path(out_dir) / f"trace_{group}.csv"
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    draws = np.asarray(rows, dtype=float) if rows else np.empty((0, len(names)))
    return TraceGroup(names, draws.reshape(-1, len(names)))


def read_theta_mean(out_dir) -> list[np.ndarray]:
    path = Path(out_dir) / "theta_mean.csv"
    per_level: dict[int, dict[tuple[int, int], float]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for level, trait, subject, est in reader:
            per_level.setdefault(int(level), {})[(int(trait), int(subject))] = float(est)
    out = []
    for level in sorted(per_level):
        cells = per_level[level]
        n_traits = max(t for t, _ in cells)
        n_subj = max(s for _, s in cells)
        arr = np.empty((n_traits, n_subj))
        for (t, s), v in cells.items():
            arr[t - 1, s - 1] = v
        out.append(arr)
    return out


def write_manifest(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())


def write_summary(path, rows: list[dict]) -> None:
    """Per-parameter posterior table: mean, sd and central interval."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "mean", "sd", "ci_low", "ci_high", "ci_range"])
        for r in rows:
            writer.writerow(
                [r["parameter"]]
                + [_fmt(r[k]) for k in ("mean", "sd", "ci_low", "ci_high", "ci_range")]
            )


def write_rmse_report(path, rows: list[dict]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "trait", "rmse"])
        for r in rows:
            writer.writerow([r["level"], r["trait"], _fmt(r["rmse"])])


def write_scatter(path, records) -> None:
    """Plot-ready per-subject (truth, estimate) pairs."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "trait", "subject", "truth", "estimate"])
        for level, trait, subject, truth, est in records:
            writer.writerow([level, trait, subject, _fmt(truth), _fmt(est)])
