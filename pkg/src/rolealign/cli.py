"""Batch command-line interface.

Four subcommands: discover (end-to-end formation learning on one input),
compare (soft pipeline against the hard-assignment baseline, with
compression sweeps), bench (per-iteration timing of both methods across
agent counts), and context (per-metadata-slice templates aligned to a
shared global one).  Every command writes a manifest.json capturing config,
input hash, seed and timings, enough to reproduce the run.

Exit codes: 0 success, 1 internal error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .alignment import (Template, align_template, assign_roles,
                        average_log_likelihood, run_pipeline)
from .assignment import hungarian
from .baseline import hard_assignment_em, player_identity_template
from .clustering import pca_variance_explained, wce_sweep
from .discovery import (DiscoveryConfig, Formation, _component_log_pdfs,
                        discover_formation)
from .geometry import Gaussian2D, kl_divergence, role_area
from .ingest import (Dataset, EmptySelectionError, ParseError,
                     center_normalize, filter_key_frames, filter_metadata,
                     flatten, normalize_attack_direction, parse_tracking)
from .synth import generate_formation, sample_dataset
from .version import __version__


@dataclass
class RunManifest:
    command: str
    version: str
    config: dict
    input: str | None
    input_sha256: str | None
    seed: int
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=1)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _parse_filter(expr):
    """EXPR like "team=home;period=1" with keys team, game, period."""
    out = {}
    for part in expr.replace(",", ";").split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"bad filter clause {part!r}, expected key=value")
        key, value = part.split("=", 1)
        key = key.strip()
        if key not in ("team", "game", "period"):
            raise ValueError(f"unknown filter key {key!r}")
        out[key] = int(value) if key == "period" else value.strip()
    if not out:
        raise ValueError(f"empty filter expression {expr!r}")
    return out


def _load_and_prepare(args):
    """Parse input, apply the metadata filter, and normalize."""
    ds = parse_tracking(args.input, args.format)
    if getattr(args, "filter", None):
        clauses = _parse_filter(args.filter)
        try:
            ds = filter_metadata(ds, **clauses)
        except EmptySelectionError:
            raise EmptySelectionError(
                f"no frames match filter {args.filter!r}") from None
    return center_normalize(normalize_attack_direction(ds))


def _config_dict(args, cfg=None):
    d = {k: v for k, v in vars(args).items() if k != "func"}
    if cfg is not None:
        d["discovery"] = asdict(cfg)
    return d


def _make_config(args, n_agents):
    k = args.k if args.k is not None else n_agents
    return DiscoveryConfig(k=k, eig_ratio_bound=args.eig_ratio,
                           em_tol=args.em_tol, max_iters=args.max_iters,
                           seed=args.seed, init_mode=args.init)


def cmd_discover(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    t0 = time.perf_counter()
    full = _load_and_prepare(args)
    timings["parse"] = time.perf_counter() - t0

    training = filter_key_frames(full) if args.key_frames_only else full
    cfg = _make_config(args, full.n_agents)
    t1 = time.perf_counter()
    formation, trace = discover_formation(training, cfg)
    timings["discover"] = time.perf_counter() - t1

    outputs = []
    with open(out / "formation.json", "w") as fh:
        json.dump(formation.to_dict(), fh, indent=1)
    outputs.append("formation.json")
    if args.parent_template:
        parent = Template.load(args.parent_template)
        template = align_template(formation, parent)
        template.save(out / "template.json")
        outputs.append("template.json")
    trace.to_csv(out / "emtrace.csv")
    outputs.append("emtrace.csv")

    warnings_list = []
    if not trace.converged:
        warnings_list.append("EM stopped at max_iters without reaching the "
                             "gain threshold")
    manifest = RunManifest(
        command="discover", version=__version__,
        config=_config_dict(args, cfg), input=args.input,
        input_sha256=_sha256(args.input), seed=args.seed, timings=timings,
        warnings=warnings_list, outputs=outputs,
        stats={"total_rows": full.n_frames * full.n_agents,
               "training_rows": training.n_frames * training.n_agents,
               "em_iterations": len(trace.rows) - 1,
               "converged": trace.converged})
    manifest.save(out / "manifest.json")
    return 0


def cmd_compare(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    t0 = time.perf_counter()
    full = _load_and_prepare(args)
    timings["parse"] = time.perf_counter() - t0

    cfg = _make_config(args, full.n_agents)
    parent = Template.load(args.parent_template) if args.parent_template \
        else None
    t1 = time.perf_counter()
    res = run_pipeline(full, cfg, parent=parent,
                       key_frames_only=args.key_frames_only)
    timings["soft"] = time.perf_counter() - t1

    t2 = time.perf_counter()
    init = player_identity_template(res.dataset)
    hard_formation, hard_aligned, hard_trace = hard_assignment_em(
        res.dataset, init, max_iters=args.max_iters)
    timings["hard"] = time.perf_counter() - t2

    hard_ll = average_log_likelihood(res.dataset, hard_formation)
    hard_as_template = align_template(hard_formation, res.template)
    per_role_kl = [kl_divergence(a, b) for a, b in
                   zip(res.template.roles, hard_as_template.roles)]
    per_role_area = [role_area(a) - role_area(b) for a, b in
                     zip(res.template.roles, hard_as_template.roles)]

    s = res.dataset.n_frames
    identity = res.dataset.stacked().reshape(s, -1)
    ks = list(range(2, min(21, s)))
    sweep_aligned = wce_sweep(res.aligned.matrix, ks)
    sweep_identity = wce_sweep(identity, ks)
    pca_aligned = pca_variance_explained(res.aligned.matrix)
    pca_identity = pca_variance_explained(identity)

    report = {
        "soft_avg_loglik": res.avg_loglik,
        "hard_avg_loglik": hard_ll,
        "delta_avg_loglik": res.avg_loglik - hard_ll,
        "per_role_kl": per_role_kl,
        "per_role_area_diff": per_role_area,
        "wce": {"ks": [r["k"] for r in sweep_aligned],
                "aligned": [r["wce"] for r in sweep_aligned],
                "identity": [r["wce"] for r in sweep_identity]},
        "pca": {"aligned": pca_aligned.tolist(),
                "identity": pca_identity.tolist()},
        "soft_converged": res.trace.converged,
        "hard_converged": hard_trace.converged,
        "hard_oscillated": hard_trace.oscillated,
    }
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=1)
    with open(out / "wce_sweep.csv", "w") as fh:
        fh.write("k,wce_aligned,wce_identity\n")
        for ra, ri in zip(sweep_aligned, sweep_identity):
            fh.write(f"{ra['k']},{ra['wce']!r},{ri['wce']!r}\n")
    with open(out / "pca.csv", "w") as fh:
        fh.write("component,aligned_fraction,identity_fraction\n")
        for i, (a, b) in enumerate(zip(pca_aligned, pca_identity)):
            fh.write(f"{i},{a!r},{b!r}\n")
    res.trace.to_csv(out / "emtrace.csv")
    hard_trace.to_csv(out / "hard_trace.csv")

    manifest = RunManifest(
        command="compare", version=__version__,
        config=_config_dict(args, cfg), input=args.input,
        input_sha256=_sha256(args.input), seed=args.seed, timings=timings,
        outputs=["report.json", "wce_sweep.csv", "pca.csv", "emtrace.csv",
                 "hard_trace.csv"],
        stats={"delta_avg_loglik": report["delta_avg_loglik"]})
    manifest.save(out / "manifest.json")
    return 0


def _hard_iteration_seconds(roles, weights, pts, s, n):
    """One hard-EM iteration: per-point densities, a Hungarian solve per
    frame, then per-role refits.  Mirrors the baseline loop body."""
    k = len(roles)
    start = time.perf_counter()
    helper = Formation(components=tuple(
        Gaussian2D(mean=r.mean, cov=r.cov, weight=1.0 / k) for r in roles))
    dens = _component_log_pdfs(helper, pts)
    cost_all = (-dens).reshape(s, n, k)
    mappings = np.empty((s, n), dtype=int)
    for f in range(s):
        mappings[f] = hungarian(cost_all[f]).mapping
    flat_roles = mappings.reshape(-1)
    for j in range(k):
        member = pts[flat_roles == j]
        if len(member) > 1:
            member.mean(axis=0)
            np.cov(member.T, bias=True)
    return time.perf_counter() - start


def cmd_bench(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ns = [int(x) for x in args.n_range.split(",") if x.strip()]
    if not ns:
        raise ValueError(f"empty n range {args.n_range!r}")
    from .discovery import em_step_full

    rows = []
    for n in ns:
        tmpl = generate_formation(n, separation=3.0, seed=args.seed)
        ds, _ = sample_dataset(tmpl, args.s, swap_rate=0.05,
                               seed=args.seed + n)
        pts = flatten(ds)
        warm_cfg = DiscoveryConfig(k=n, max_iters=3, seed=args.seed)
        state, _ = discover_formation(ds, warm_cfg)
        init = player_identity_template(ds)
        # warm both paths once so lazy numpy setup is off the clock
        em_step_full(state, pts)
        _hard_iteration_seconds(list(init.roles), None, pts, ds.n_frames, n)
        batch = 3  # soft iterations are sub-ms; time them in small batches
        soft_times = []
        hard_times = []
        for _ in range(args.reps):
            t = time.perf_counter()
            for _ in range(batch):
                em_step_full(state, pts)
            soft_times.append((time.perf_counter() - t) / batch)
            hard_times.append(_hard_iteration_seconds(
                list(init.roles), None, pts, ds.n_frames, n))
        # min over reps: scheduler noise only ever adds time
        rows.append({"n": n, "soft": float(min(soft_times)),
                     "hard": float(min(hard_times))})

    with open(out / "bench.csv", "w") as fh:
        fh.write("n,soft_seconds,hard_seconds,ratio\n")
        for r in rows:
            fh.write(f"{r['n']},{r['soft']!r},{r['hard']!r},"
                     f"{r['hard'] / r['soft']!r}\n")

    log_n = np.log([r["n"] for r in rows])
    slope_soft = float(np.polyfit(log_n, np.log([r["soft"] for r in rows]), 1)[0])
    slope_hard = float(np.polyfit(log_n, np.log([r["hard"] for r in rows]), 1)[0])
    ratio_at_10 = next((r["hard"] / r["soft"] for r in rows if r["n"] == 10),
                       None)
    summary = {"slope_soft": slope_soft, "slope_hard": slope_hard,
               "slope_difference": slope_hard - slope_soft,
               "ratio_at_10": ratio_at_10}
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)

    manifest = RunManifest(
        command="bench", version=__version__, config=_config_dict(args),
        input=None, input_sha256=None, seed=args.seed,
        warnings=["thread count pinned to 1 for the complexity fit"],
        outputs=["bench.csv", "summary.json"], stats=summary)
    manifest.save(out / "manifest.json")
    return 0


def _slug(value):
    text = str(value) if str(value) else "any"
    return "".join(ch if ch.isalnum() else "-" for ch in text)


def cmd_context(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    t0 = time.perf_counter()
    full = _load_and_prepare(args)
    timings["parse"] = time.perf_counter() - t0

    cfg = _make_config(args, full.n_agents)
    t1 = time.perf_counter()
    global_formation, _ = discover_formation(full, cfg)
    if args.parent_template:
        global_template = align_template(
            global_formation, Template.load(args.parent_template))
    else:
        global_template = Template.from_formation(global_formation)
    global_template.save(out / "global.template.json")
    timings["global"] = time.perf_counter() - t1

    contexts = []
    for f in full.frames:
        key = (f.team, f.game, f.period)
        if key not in contexts:
            contexts.append(key)
    outputs = ["global.template.json"]
    t2 = time.perf_counter()
    for team, game, period in contexts:
        sub = filter_metadata(full, team=team, game=game, period=period)
        formation, _ = discover_formation(sub, cfg)
        template = align_template(formation, global_template)
        name = f"context_{_slug(team)}_{_slug(game)}_{_slug(period)}" \
               f".template.json"
        template.save(out / name)
        outputs.append(name)
    timings["contexts"] = time.perf_counter() - t2

    manifest = RunManifest(
        command="context", version=__version__,
        config=_config_dict(args, cfg), input=args.input,
        input_sha256=_sha256(args.input), seed=args.seed, timings=timings,
        outputs=outputs, stats={"n_contexts": len(contexts)})
    manifest.save(out / "manifest.json")
    return 0


def _add_common(sp):
    sp.add_argument("--input", required=True, help="tracking data file")
    sp.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--k", type=int, default=None,
                    help="role count (default: agent count)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--eig-ratio", type=float, default=2.0,
                    help="covariance eigenvalue ratio guard band")
    sp.add_argument("--em-tol", type=float, default=1e-6)
    sp.add_argument("--max-iters", type=int, default=500)
    sp.add_argument("--init", choices=("player-means", "random"),
                    default="player-means")
    sp.add_argument("--key-frames-only", action="store_true")
    sp.add_argument("--parent-template", default=None,
                    help="template JSON fixing the role order")
    sp.add_argument("--threads", type=int, default=1,
                    help="accepted for interface stability; results are "
                         "thread-count invariant")
    sp.add_argument("--filter", default=None, metavar="EXPR",
                    help="metadata filter, e.g. team=home;period=1")


def build_parser():
    p = argparse.ArgumentParser(
        prog="rolealign",
        description="Formation discovery and role alignment for "
                    "multi-agent tracking data")
    p.add_argument("--version", action="version",
                   version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("discover", help="learn a formation from one input")
    _add_common(d)
    d.set_defaults(func=cmd_discover)

    c = sub.add_parser("compare",
                       help="soft pipeline vs hard-assignment baseline")
    _add_common(c)
    c.set_defaults(func=cmd_compare)

    b = sub.add_parser("bench", help="per-iteration timing across N")
    b.add_argument("--n-range", default="4,6,8,10,12,14",
                   help="comma-separated agent counts")
    b.add_argument("--s", type=int, default=200, help="frames per dataset")
    b.add_argument("--reps", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    x = sub.add_parser("context",
                       help="per-context templates aligned to a global one")
    _add_common(x)
    x.set_defaults(func=cmd_context)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return args.func(args)
    except (ParseError, EmptySelectionError, FileNotFoundError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:   # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
