"""Command-line front end: experiment orchestration and artifact emission.

Subcommands::

    spectralsde check-lemma     --config run.toml [--out-dir DIR]
    spectralsde simulate        --config run.toml [--dump-increments]
    spectralsde maxreg          --config run.toml
    spectralsde oracle          --config run.toml
    spectralsde compare-uniform --config run.toml

Every run writes a ``manifest.json`` (config digest, seed, version, counts,
timings) next to its data artifacts.  Artifacts are byte-stable: floats are
emitted with 17 significant digits, JSON keys are sorted, row order is fixed,
and Monte Carlo reductions are chunk-ordered, so repeated runs with the same
config and seed produce identical bytes for any worker-thread count (wall
clock timings in the manifest are the one intentional exception).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    exact_second_moments,
    map_chunks,
    maxreg_lhs,
    mc_regularity_experiment,
)
from .config import RunConfig, config_digest, parse_config_file
from .errors import SpectralSDEError
from .grids import build_level_grids, merge_grids
from .noise import NoiseStream, path_increments, restrict_merged_increments, sample_merged_increments, aggregate_level_increments
from .resolvent import build_resolvent_table, weight_sum_modes
from .solver import SolverInput, run_recursive

_CSV_SCHEMAS = {
    "weights.csv": "j,lambda,ell,i,weight_sum,bound,margin",
    "trajectory.csv": "path,eta,tau,j,value",
    "increments.csv": "path,level,merged_step,value",
    "moments.csv (oracle)": "eta,tau,j,moment",
    "moments.csv (maxreg)": "eta,tau,dtau,lhs_term_full,lhs_term_conv",
}


def _fmt(x) -> str:
    # 17 significant digits guarantee float64 round-trips
    return format(float(x), ".17g")


def _build_problem(cfg: RunConfig) -> SolverInput:
    es = cfg.eigensystem()
    grids = cfg.level_grids()
    merged = merge_grids(grids)
    table = build_resolvent_table(es, merged)
    op = cfg.operator(es)
    xi = cfg.initial_state(es)
    return SolverInput(es, grids, merged, table, op, xi)


class _Timings:
    def __init__(self):
        self.phases = {}

    def phase(self, name):
        timings = self.phases

        class _Ctx:
            def __enter__(self):
                self._t0 = time.perf_counter()

            def __exit__(self, *exc):
                timings[name] = timings.get(name, 0.0) + time.perf_counter() - self._t0
                return False

        return _Ctx()


def _write_manifest(outdir: Path, cfg: RunConfig, subcommand: str,
                    inp: SolverInput, outputs: list[str], timings: _Timings) -> None:
    manifest = {
        "config_digest": config_digest(cfg),
        "seed": cfg.seed,
        "version": __version__,
        "subcommand": subcommand,
        "counts": {
            "N": inp.merged.n_steps,
            "J": inp.es.n_modes,
            "L": inp.es.n_levels,
        },
        "csv_schemas": {k: _CSV_SCHEMAS[k] for k in _CSV_SCHEMAS},
        "outputs": sorted(outputs),
        "timings": timings.phases,
    }
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _run_check_lemma(cfg: RunConfig, outdir: Path, args, timings: _Timings) -> list[str]:
    inp = _build_problem(cfg)
    es, m, table = inp.es, inp.merged, inp.table
    path = outdir / "weights.csv"
    with timings.phase("weights"), open(path, "w", encoding="utf-8") as fh:
        fh.write("j,lambda,ell,i,weight_sum,bound,margin\n")
        bounds = 2.0 / es.lambdas
        for ell in range(1, m.n_levels + 1):
            for i in range(1, m.level_counts[ell - 1] + 1):
                weights = weight_sum_modes(table, m, ell, i)
                for j in range(1, es.n_modes + 1):
                    w = weights[j - 1]
                    b = bounds[j - 1]
                    fh.write(
                        f"{j},{_fmt(es.lambdas[j - 1])},{ell},{i},"
                        f"{_fmt(w)},{_fmt(b)},{_fmt(b - w)}\n"
                    )
    _write_manifest(outdir, cfg, "check-lemma", inp, ["weights.csv"], timings)
    return ["weights.csv", "manifest.json"]


def _run_simulate(cfg: RunConfig, outdir: Path, args, timings: _Timings) -> list[str]:
    inp = _build_problem(cfg)
    m = inp.merged

    def chunk_paths(idx_range):
        out = []
        for p in idx_range:
            inc = path_increments(inp.grids, m, NoiseStream(cfg.seed, p))
            out.append((p, run_recursive(inp.with_increments(inc)), inc))
        return out

    with timings.phase("paths"):
        chunks = map_chunks(chunk_paths, cfg.paths, threads=cfg.threads, chunk_size=64)

    outputs = ["trajectory.csv"]
    with timings.phase("write"):
        with open(outdir / "trajectory.csv", "w", encoding="utf-8") as fh:
            fh.write("path,eta,tau,j,value\n")
            for chunk in chunks:
                for p, traj, _inc in chunk:
                    for eta in range(m.n_steps + 1):
                        tau = _fmt(m.taus[eta])
                        row = traj.values[eta]
                        for j in range(1, inp.es.n_modes + 1):
                            fh.write(f"{p},{eta},{tau},{j},{_fmt(row[j - 1])}\n")
        if args.dump_increments:
            outputs.append("increments.csv")
            with open(outdir / "increments.csv", "w", encoding="utf-8") as fh:
                fh.write("path,level,merged_step,value\n")
                for chunk in chunks:
                    for p, _traj, inc in chunk:
                        for ell in range(1, m.n_levels + 1):
                            for eta in range(1, m.n_steps + 1):
                                fh.write(
                                    f"{p},{ell},{eta},{_fmt(inc.merged[ell - 1, eta - 1])}\n"
                                )
    _write_manifest(outdir, cfg, "simulate", inp, outputs, timings)
    return outputs + ["manifest.json"]


def _run_oracle(cfg: RunConfig, outdir: Path, args, timings: _Timings) -> list[str]:
    inp = _build_problem(cfg)
    m = inp.merged
    with timings.phase("moments"):
        table = exact_second_moments(inp)
    with open(outdir / "moments.csv", "w", encoding="utf-8") as fh:
        fh.write("eta,tau,j,moment\n")
        for eta in range(m.n_steps + 1):
            tau = _fmt(m.taus[eta])
            for j in range(1, inp.es.n_modes + 1):
                fh.write(f"{eta},{tau},{j},{_fmt(table.values[eta, j - 1])}\n")
    _write_manifest(outdir, cfg, "oracle", inp, ["moments.csv"], timings)
    return ["moments.csv", "manifest.json"]


def _contributions_csv(path: Path, inp: SolverInput, report) -> None:
    es, m = inp.es, inp.merged
    w = es.lambdas ** (2.0 * report.iota + 1.0)
    full = report.moments.values
    conv = report.conv_moments.values if report.conv_moments is not None else None
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("eta,tau,dtau,lhs_term_full,lhs_term_conv\n")
        for eta in range(1, m.n_steps + 1):
            dtau = m.steps[eta - 1]
            term_full = float(np.sum(w * full[eta])) * dtau
            term_conv = float(np.sum(w * conv[eta])) * dtau if conv is not None else 0.0
            fh.write(
                f"{eta},{_fmt(m.taus[eta])},{_fmt(dtau)},"
                f"{_fmt(term_full)},{_fmt(term_conv)}\n"
            )


def _run_maxreg(cfg: RunConfig, outdir: Path, args, timings: _Timings) -> list[str]:
    inp = _build_problem(cfg)
    with timings.phase("mc"):
        report = mc_regularity_experiment(
            inp, cfg.iota, cfg.seed, cfg.paths, threads=cfg.threads
        )
    with timings.phase("write"):
        with open(outdir / "report.json", "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        _contributions_csv(outdir / "moments.csv", inp, report)
    _write_manifest(outdir, cfg, "maxreg", inp, ["report.json", "moments.csv"], timings)
    return ["report.json", "moments.csv", "manifest.json"]


def _run_compare_uniform(cfg: RunConfig, outdir: Path, args, timings: _Timings) -> list[str]:
    inp = _build_problem(cfg)
    n_levels = inp.es.n_levels
    budget = sum(cfg.n_per_level)
    n_uniform = max(1, round(budget / n_levels))

    uniform_grids = build_level_grids([n_uniform] * n_levels)
    uniform_merged = merge_grids(uniform_grids)
    uniform_inp = SolverInput(
        inp.es,
        uniform_grids,
        uniform_merged,
        build_resolvent_table(inp.es, uniform_merged),
        inp.op,
        inp.xi,
    )

    # one Brownian family on the union of both grids drives both schemes
    union_grids = build_level_grids(list(cfg.n_per_level) + [n_uniform])
    union_merged = merge_grids(union_grids)

    def coupled_source(target_inp):
        grids, merged = target_inp.grids, target_inp.merged

        def source(p):
            fine = sample_merged_increments(union_merged, n_levels, NoiseStream(cfg.seed, p))
            coarse = restrict_merged_increments(union_merged, fine, merged)
            return aggregate_level_increments(coarse, grids, merged)

        return source

    with timings.phase("nonuniform"):
        report_nu = mc_regularity_experiment(
            inp, cfg.iota, cfg.seed, cfg.paths, threads=cfg.threads,
            increment_source=coupled_source(inp),
        )
    with timings.phase("uniform"):
        report_u = mc_regularity_experiment(
            uniform_inp, cfg.iota, cfg.seed, cfg.paths, threads=cfg.threads,
            increment_source=coupled_source(uniform_inp),
        )
    payload = {
        "coupled": True,
        "increment_budget": budget,
        "uniform_steps": n_uniform,
        "nonuniform": report_nu.to_dict(),
        "uniform": report_u.to_dict(),
    }
    with open(outdir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_manifest(outdir, cfg, "compare-uniform", inp, ["report.json"], timings)
    return ["report.json", "manifest.json"]


_RUNNERS = {
    "check-lemma": _run_check_lemma,
    "simulate": _run_simulate,
    "maxreg": _run_maxreg,
    "oracle": _run_oracle,
    "compare-uniform": _run_compare_uniform,
}


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectralsde",
        description="Implicit Euler-Maruyama on per-level time grids, with "
        "maximal-regularity verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out-dir", default=None, help="artifact directory (default: config or cwd)")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--paths", type=int, default=None, help="override config path count")
        p.add_argument("--threads", type=int, default=None, help="override config worker count")
        if name == "simulate":
            p.add_argument(
                "--dump-increments", action="store_true",
                help="also write the merged Brownian increments for replay",
            )
    return parser


def main(argv=None) -> int:
    args = _make_parser().parse_args(argv)
    try:
        cfg = parse_config_file(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.paths is not None:
            overrides["paths"] = args.paths
        if args.threads is not None:
            overrides["threads"] = args.threads
        if overrides:
            cfg = replace(cfg, **overrides)
        outdir = Path(args.out_dir or cfg.out_dir or ".")
        outdir.mkdir(parents=True, exist_ok=True)
        timings = _Timings()
        outputs = _RUNNERS[args.command](cfg, outdir, args, timings)
    except SpectralSDEError as exc:
        json.dump(
            {"error": {"type": type(exc).__name__, "message": str(exc),
                       "subcommand": args.command}},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return 1
    print(f"{args.command}: wrote {', '.join(outputs)} to {outdir}")
    return 0
