"""Command-line front end.

    rydfret pair          --config run.cfg --out results/
    rydfret field-scan    --seed 3 --shots 200 --workers 4 --out results/
    rydfret position-scan | time-scan | converge ...

Every run writes its CSV files, a plain-text fit report where applicable, the
resolved configuration and a JSON manifest. Outputs are written only after the
whole computation succeeded; the manifest is the only file with a timestamp.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import io
import logging
import os
import re
import sys
import tempfile
from dataclasses import replace

import numpy as np

from . import __version__, experiments
from .atomic import BRANCH_MJ, CouplingChannel, detuning, resonance_field
from .config import EXPERIMENTS, RunConfig, RunManifest, config_hash, parse_config, serialize_config, shot_config
from .config import stark_model, with_overrides
from .dynamics import beat_period, evolve, two_level_analytic
from .ensemble import TruncationPolicy, run_ensemble
from .errors import ConfigError, DomainError, RydfretError
from .hamiltonian import assemble_hamiltonian, build_basis, make_site, pair_coupling

log = logging.getLogger("rydfret")

IO_EXIT = 8


def _csv(write):
    buf = io.StringIO()
    write(buf)
    return buf.getvalue()


# ---------------------------------------------------------------- runners


def run_pair(cfg):
    """Isolated s-d pair separated by ``separation`` along the field axis."""
    stark = stark_model(cfg)
    det = detuning(cfg.field, stark, cfg.branch)
    R = cfg.separation
    times = np.asarray(cfg.times)
    channel = CouplingChannel.rb_default()
    sites = [make_site((R, 0.0, 0.0), "s", cfg.mode), make_site((0.0, 0.0, 0.0), "d", cfg.mode)]
    # branch flip-flop constant times the aligned-geometry factor
    V = pair_coupling(sites[0].position, sites[1].position, channel.branch(cfg.branch).transfer, 1.0)
    if cfg.mode == "scalar":
        problem = assemble_hamiltonian(sites, channel, detuning=det, branch=cfg.branch)
    else:
        by_mj = {mj: detuning(cfg.field, stark, b) for b, mj in BRANCH_MJ.items()}
        basis = build_basis(sites, channel, cap=cfg.basis_cap, mode="tensor", exchange=cfg.exchange)
        problem = assemble_hamiltonian(sites, channel, basis=basis, mode="tensor", stark_by_mj=by_mj,
                                       exchange=cfg.exchange)
    res = evolve(problem, times)
    analytic = two_level_analytic(V, det, times) if cfg.mode == "scalar" else np.full(times.size, np.nan)

    def write(fh):
        fh.write(f"# kind=pair mode={cfg.mode} branch={cfg.branch} separation_um={R!r} "
                 f"config_hash={config_hash(cfg)}\n")
        fh.write("time_us,p_fraction,analytic\n")
        for t, p, a in zip(times, res.p_fraction, analytic):
            fh.write(f"{float(t)!r},{float(p)!r},{float(a)!r}\n")

    report = (f"# pair\ncoupling_MHz = {V!r}\ndetuning_MHz = {det!r}\nbasis_dim = {problem.dim}\n"
              f"beat_period_us = {beat_period(V)!r}\n")
    stem = experiments.output_name("pair", cfg.branch, cfg.seed, "", R).rstrip(".")
    return {f"{stem}.csv": _csv(write), f"{stem}_report.txt": report}, ()


def run_field_scan(cfg):
    base = shot_config(cfg)
    scan = experiments.field_scan(base, cfg.fields, cfg.time, cfg.shots, cfg.workers)
    name = experiments.output_name("field-scan", scan.branch, cfg.seed)
    files = {name: _csv(lambda fh: experiments.scan_to_csv(scan, fh))}
    try:
        fits = experiments.fit_field_peaks(scan)
        files[name.replace(".csv", "_fit.txt")] = _csv(lambda fh: experiments.fit_report(
            fits, fh, f"Lorentzian fits, separation {cfg.separation:g} um"))
    except DomainError as exc:
        files[name.replace(".csv", "_fit.txt")] = f"# fit skipped: {exc}\n"
    return files, scan.warnings


def run_position_scan(cfg):
    scan = experiments.position_scan(shot_config(cfg), cfg.separations, cfg.time, cfg.branch, cfg.shots,
                                     cfg.workers)
    name = experiments.output_name("position-scan", cfg.branch, cfg.seed)
    files = {name: _csv(lambda fh: experiments.scan_to_csv(scan, fh))}
    try:
        fits = {"wings_effective": experiments.wing_fit(scan), "wings_raw": experiments.wing_fit(scan, effective=False)}
        report = _csv(lambda fh: experiments.fit_report(fits, fh, "power law over |d| >= 30 um"))
    except DomainError as exc:
        report = f"# fit skipped: {exc}\n"
    files[name.replace(".csv", "_fit.txt")] = report
    return files, scan.warnings


def run_time_scan(cfg):
    base = shot_config(cfg)
    scans = experiments.time_scan(base, cfg.separations, cfg.times, cfg.branch, cfg.shots, cfg.workers)
    files = {}
    for s in scans:
        files[experiments.output_name("time-scan", cfg.branch, cfg.seed, "csv", s.separation)] = _csv(
            lambda fh, s=s: experiments.scan_to_csv(s, fh))
    rates = [experiments.rate_extraction(s, cfg.threshold) for s in scans]

    def write_rates(fh):
        fh.write(f"# kind=rates threshold={cfg.threshold!r} seed={cfg.seed} config_hash={config_hash(cfg)}\n")
        fh.write("separation_um,effective_um,tau_us,rate_MHz,censored\n")
        for r in rates:
            d_eff = float(experiments.effective_distance(r.separation, base))
            tau = "" if r.tau is None else repr(r.tau)
            rate = "" if r.rate is None else repr(r.rate)
            fh.write(f"{r.separation!r},{d_eff!r},{tau},{rate},{int(r.censored)}\n")

    files[experiments.output_name("rates", cfg.branch, cfg.seed)] = _csv(write_rates)
    try:
        fit, _ = experiments.rate_fit(scans, cfg.threshold)
        report = _csv(lambda fh: experiments.fit_report({"rate_vs_effective_distance": fit}, fh))
    except DomainError as exc:
        report = f"# fit skipped: {exc}\n"
    files[experiments.output_name("rates", cfg.branch, cfg.seed, "txt")] = report
    warnings = tuple(sorted({w for s in scans for w in s.warnings}))
    return files, warnings


CONVERGE_SETS = ((1, 1), (2, 2), (2, 3), (3, 3), (3, 4))


def run_converge(cfg):
    """Mean curves at one separation for growing truncation sets."""
    base = replace(shot_config(cfg), electric_field=resonance_field(stark_model(cfg), cfg.branch))
    policies = [(f"fixed_{s}s{d}d", TruncationPolicy("fixed", s, d)) for s, d in CONVERGE_SETS]
    policies.append(("convergence", TruncationPolicy("convergence", tolerance=cfg.tolerance, cap=cfg.atom_cap)))
    results = [(label, run_ensemble(replace(base, truncation=p), cfg.shots, cfg.workers)) for label, p in policies]
    warnings = tuple(sorted({w for _, r in results for w in r.warnings}))

    def write(fh):
        fh.write(f"# kind=converge separation_um={cfg.separation!r} seed={cfg.seed} config_hash={config_hash(cfg)}\n")
        fh.write("time_us," + ",".join(f"{label},{label}_stderr" for label, _ in results) + "\n")
        for k, t in enumerate(cfg.times):
            row = [repr(float(t))]
            for _, r in results:
                row += [repr(float(r.mean[k])), repr(float(r.stderr[k]))]
            fh.write(",".join(row) + "\n")

    lines = ["# successive max |difference| of mean curves"]
    for (la, ra), (lb, rb) in zip(results[:-2], results[1:-1]):
        lines.append(f"{la} -> {lb}: {float(np.max(np.abs(ra.mean - rb.mean)))!r}")
    ref = dict(results)["fixed_2s3d"]
    lines.append(f"convergence vs fixed_2s3d: {float(np.max(np.abs(results[-1][1].mean - ref.mean)))!r}")
    name = experiments.output_name("converge", cfg.branch, cfg.seed)
    return {name: _csv(write), name.replace(".csv", "_report.txt"): "\n".join(lines) + "\n"}, warnings


RUNNERS = {
    "pair": run_pair,
    "field-scan": run_field_scan,
    "position-scan": run_position_scan,
    "time-scan": run_time_scan,
    "converge": run_converge,
}


# ---------------------------------------------------------------- output


def check_out_dir(path):
    """Fail before any work if ``path`` cannot hold the results."""
    if os.path.exists(path):
        if not os.path.isdir(path):
            raise OSError(f"output path {path!r} exists and is not a directory")
        if not os.access(path, os.W_OK | os.X_OK):
            raise OSError(f"output directory {path!r} is not writable")
        return
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise OSError(f"parent of output directory {path!r} does not exist")
    if not os.access(parent, os.W_OK | os.X_OK):
        raise OSError(f"cannot create output directory in {parent!r}")


def write_outputs(path, files):
    """Stage every file in a temporary directory, then move them in place."""
    created = not os.path.exists(path)
    os.makedirs(path, exist_ok=True)
    moved = []
    try:
        with tempfile.TemporaryDirectory(dir=path, prefix=".staging-") as stage:
            for name, text in files.items():
                with open(os.path.join(stage, name), "w", newline="") as fh:
                    fh.write(text)
            for name in files:
                os.replace(os.path.join(stage, name), os.path.join(path, name))
                moved.append(name)
    except OSError:
        for name in moved:
            try:
                os.remove(os.path.join(path, name))
            except OSError:
                pass
        if created:
            try:
                os.rmdir(path)
            except OSError:
                pass
        raise


def run(cfg, out=None):
    """Execute ``cfg`` and write its outputs; returns the manifest."""
    out = cfg.out if out is None else out
    check_out_dir(out)
    files, warnings = RUNNERS[cfg.experiment](cfg)
    stem = f"{cfg.experiment}_seed{cfg.seed}"
    files[f"config_{stem}.txt"] = serialize_config(cfg, runtime=False)
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    manifest = RunManifest.build(cfg, files, warnings, stamp)
    files[f"manifest_{stem}.json"] = manifest.to_json()
    write_outputs(out, files)
    return manifest


# ---------------------------------------------------------------- argparse


def build_parser():
    parser = argparse.ArgumentParser(prog="rydfret", description="Resonant Rydberg energy-transfer simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", metavar="PATH", help="key = value unit configuration file")
        p.add_argument("--seed", type=int, help="base seed (overrides config)")
        p.add_argument("--shots", type=int, help="shots per scan point (overrides config)")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
        p.add_argument("--workers", type=int, help="worker processes (overrides config)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_config(args):
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
        cfg = parse_config(text)
        if re.search(r"^\s*experiment\s*=", text, re.M) and cfg.experiment != args.command:
            raise ConfigError(f"config is for {cfg.experiment!r}, not {args.command!r}")
    else:
        cfg = RunConfig()
    return with_overrides(cfg, experiment=args.command, seed=args.seed, shots=args.shots, out=args.out,
                          workers=args.workers)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        manifest = run(cfg)
    except RydfretError as exc:
        print(f"rydfret: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"rydfret: I/O error: {exc}", file=sys.stderr)
        return IO_EXIT
    for w in manifest.warnings:
        log.warning(w)
    print(f"wrote {len(manifest.outputs) + 1} files to {cfg.out} (config {manifest.config_hash})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
