"""Command-line entry point: ``vidstory run|simulate|bench|stats|report``.

Configuration precedence: command-line flags, then the ``--config`` file,
then built-in defaults. Credentials are read only from environment variables
named in the backend config.

Exit codes:
    0  success
    1  internal error, or every scenario/iteration failed without a more
       specific category
    2  configuration or input error
    3  transport error (backend unreachable, retries exhausted, HTTP error)
    4  schema error (a backend or judge broke its output contract)
    5  assembly error (final muxing failed)
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import shutil
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__, agreement, bandit, benchmark
from .artifacts import RunStore, tree_digest
from .backends import Attachment, Backends, Capability, CapabilityRequest, SimBackend, SimEnvironment, invoke_structured
from .backends.config import http_backends
from .config import EngineConfig, load_config_file, resolve_config
from .errors import ConfigError, SchemaError, ValidationError, VidstoryError
from .experiment import POLICIES, run_experiment
from .pipeline import ScenarioInputs, run
from .prompts import render
from .verifiers import BENCH_METRICS, parse_bench_report

log = logging.getLogger("vidstory")

EXIT_CODES = {"ok": 0, "internal": 1, "config": 2, "transport": 3, "schema": 4, "assembly": 5}


def exit_code(exc: BaseException) -> int:
    return EXIT_CODES.get(getattr(exc, "category", "internal"), 1)


# --- shared helpers ----------------------------------------------------------

def _engine_config(args) -> EngineConfig:
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    flags = {
        "seed": getattr(args, "seed", None),
        "jobs": getattr(args, "jobs", None),
        "out_dir": getattr(args, "out_dir", None),
        "T": getattr(args, "T", None),
        "max_retries": getattr(args, "max_retries", None),
        "tau_l": getattr(args, "tau_l", None),
        "tau_k": getattr(args, "tau_k", None),
        "exploration_constant": getattr(args, "exploration", None),
        "scenes": getattr(args, "scenes", None),
        "runtime_s": getattr(args, "runtime", None),
        "backends": getattr(args, "backends", None),
        "muxer": getattr(args, "muxer", None),
        "sim_env": getattr(args, "env", None),
    }
    if getattr(args, "no_warm_start", False):
        flags["warm_start"] = False
    return resolve_config(file_values, flags)


def _sim_env(cfg: EngineConfig) -> SimEnvironment:
    if cfg.sim_env:
        try:
            return SimEnvironment.load(cfg.sim_env)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load sim environment {cfg.sim_env}: {exc}") from None
    return SimEnvironment.random(cfg.seed)


def _backends(args, cfg: EngineConfig) -> Backends:
    if args.sim:
        return Backends.uniform(SimBackend(seed=cfg.seed, env=_sim_env(cfg)))
    if not cfg.backends:
        raise ConfigError("no backend config given; pass --backends FILE or use --sim")
    return http_backends(cfg.backends)


def _run_id(args, cfg: EngineConfig, prompt: str, images) -> str:
    if getattr(args, "run_id", None):
        return args.run_id
    # only settings that change run content; out_dir and jobs do not
    settings = {k: v for k, v in cfg.to_dict().items() if k not in ("out_dir", "jobs", "scene_jobs")}
    h = hashlib.sha256(json.dumps([prompt, [Path(i).name for i in images], settings], sort_keys=True).encode())
    return f"{'sim' if args.sim else 'run'}-s{cfg.seed}-{h.hexdigest()[:12]}"


def _prepare_dir(path: Path, force: bool) -> None:
    if path.exists() and any(path.iterdir()):
        if not force:
            raise ConfigError(f"run directory {path} already exists; pass --force to replace it")
        if not (path / "context.json").exists():
            raise ConfigError(f"refusing to replace {path}: it does not look like a run directory")
        shutil.rmtree(path)


def _run_one(args, cfg: EngineConfig, prompt: str, images, run_dir: Path | None = None, force: bool = False):
    for img in images:
        if not Path(img).is_file():
            raise ConfigError(f"reference image {img} not found")
    backends = _backends(args, cfg)
    run_dir = run_dir or Path(cfg.out_dir) / _run_id(args, cfg, prompt, images)
    _prepare_dir(run_dir, force or getattr(args, "force", False))
    store = RunStore(run_dir)
    policy = bandit.new_policy(cfg.exploration_constant)
    best, records = run(ScenarioInputs(prompt, list(images)), policy, backends, store, cfg.settings(), cfg.seed)
    return store, best, records, backends


def _summary_lines(store: RunStore, best, records) -> list[str]:
    lines = [f"run directory: {store.root}"]
    for r in records:
        status = f"aggregate {r.aggregate:.2f}" if r.ok else f"FAILED ({r.error_category}): {r.error}"
        lines.append(f"  iter-{r.iteration}: {' / '.join(r.config.labels)}  {status}")
    if best is None:
        lines.append("no iteration produced a judged video")
    else:
        lines.append(f"best: iter-{best.iteration} {' / '.join(best.config.labels)} aggregate {best.aggregate:.2f}")
        lines.append(f"  manifest: {store.root / best.artifacts['manifest']}")
        if best.artifacts.get("video"):
            lines.append(f"  video: {store.root / best.artifacts['video']}")
        lines.append(f"  report: {store.root / best.artifacts['report']}")
    return lines


def _failure_code(records) -> int:
    cats = [r.error_category for r in records if r.error_category]
    return EXIT_CODES.get(cats[-1], 1) if cats else 1


# --- subcommands ---------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = _engine_config(args)
    images = list(args.image or [])
    if args.scenario:
        scenarios = benchmark.load_scenarios(args.scenario)
        match = [s for s in scenarios if s.id == args.id]
        if not match:
            raise ConfigError(f"scenario id {args.id} not in {args.scenario}")
        sc = match[0]
        prompt = sc.six_point_prompt()
        base = Path(args.scenario).parent
        images = [base / sc.logo_ref, base / sc.product_ref] + images
    elif args.prompt:
        prompt = args.prompt
    else:
        raise ConfigError("give either --prompt or --scenario")
    store, best, records, _ = _run_one(args, cfg, prompt, images)
    print("\n".join(_summary_lines(store, best, records)))
    print(f"tree digest: {tree_digest(store.root)}")
    return 0 if best is not None else _failure_code(records)


def cmd_simulate(args) -> int:
    cfg = _engine_config(args)
    if args.policy not in POLICIES:
        raise ConfigError(f"unknown policy {args.policy!r}; choose from {', '.join(POLICIES)}")
    env = _sim_env(cfg)
    report = run_experiment(env, args.policy, args.T or 10, args.repeats, cfg.seed, cfg.exploration_constant,
                            args.prior_sigma, cfg.prior_weight)
    report["env"] = env.to_dict()
    text = json.dumps(report, indent=2) + "\n"
    out = Path(args.output) if args.output else Path(cfg.out_dir) / f"simulate-{args.policy}-s{cfg.seed}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    cb = report["mean_cumulative_best"]
    print(f"{args.policy}: mean cumulative best {cb[0]:.2f} (t=1) -> {cb[-1]:.2f} (t={len(cb)}); "
          f"optimum {report['optimum']['aggregate']:.2f}; best-arm accuracy {report['best_arm_accuracy']['mean']:.3f}")
    print(f"report: {out}")
    return 0


def judge_bench(scenario: benchmark.Scenario, store: RunStore, best, backend, base: Path):
    attachments = []
    for ref in (scenario.logo_ref, scenario.product_ref):
        p = base / ref
        if p.is_file():
            attachments.append(Attachment(ref, p.read_bytes(), "image/png"))
    if best.artifacts.get("video"):
        attachments.append(Attachment(best.artifacts["video"], store.read(best.artifacts["video"]), "video/mp4"))
    else:
        for c in best.artifacts["clips"]:
            attachments.append(Attachment(c["video_ref"], store.read(c["video_ref"]), "video/mp4"))
    constraints = "\n".join(f"{k}: {getattr(scenario, k)}" for k in
                            ("brand", "product", "gender", "age", "location", "interest"))
    req = CapabilityRequest(Capability.Judge, render("bench_judge", constraints=constraints),
                            tuple(attachments), {"task": "bench", "payload": json.dumps({"id": scenario.id})})
    return invoke_structured(backend, req, parse_bench_report)


def _read_results(path: Path) -> list[dict]:
    out = []
    if not path.exists():
        return out
    for n, line in enumerate(path.read_text().splitlines(), 1):
        if line.strip():
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError:
                raise SchemaError(f"{path}:{n}: malformed JSON", field="<line>") from None
    return out


def cmd_bench(args) -> int:
    cfg = _engine_config(args)
    scenarios = benchmark.load_scenarios(args.scenarios)
    if args.split:
        scenarios = [s for s in scenarios if s.split.value == args.split]
    if args.limit:
        scenarios = scenarios[: args.limit]
    results_path = Path(args.results) if args.results else Path(cfg.out_dir) / "results.jsonl"
    existing = _read_results(results_path)
    if existing and not args.resume:
        raise ConfigError(f"{results_path} already has results; pass --resume to continue it")
    done = {r["scenario_id"] for r in existing}
    todo = [s for s in scenarios if s.id not in done]
    results_path.parent.mkdir(parents=True, exist_ok=True)
    base = Path(args.scenarios).parent
    lock = threading.Lock()
    failures: list[tuple[int, BaseException]] = []

    def one(sc: benchmark.Scenario):
        images = [base / sc.logo_ref, base / sc.product_ref]
        images = [p for p in images if p.is_file()] if args.sim else images
        try:
            store, best, records, backends = _run_one(
                args, cfg, sc.six_point_prompt(), images, Path(cfg.out_dir) / f"scenario-{sc.id}", force=args.resume)
            if best is None:
                raise VidstoryError(f"every iteration failed: {records[-1].error}")
            scores = judge_bench(sc, store, best, backends.judge, base)
        except VidstoryError as exc:
            log.error("scenario %d failed: %s", sc.id, exc)
            with lock:
                failures.append((sc.id, exc))
            return
        line = {"scenario_id": sc.id, "split": sc.split.value, "run_dir": str(store.root),
                "best_iteration": best.iteration, "best_config": best.config.to_dict(), **scores.to_dict()}
        with lock, results_path.open("a") as fh:
            fh.write(json.dumps(line, sort_keys=True) + "\n")

    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        list(pool.map(one, todo))

    rows = _read_results(results_path)
    if todo and len(failures) == len(todo):
        print(f"all {len(todo)} scenario(s) failed", file=sys.stderr)
        return exit_code(failures[-1][1]) if exit_code(failures[-1][1]) != 0 else 1
    if not rows:
        print("no results")
        return 0
    from .verifiers import BenchScores

    agg = benchmark.aggregate([BenchScores.from_dict(r) for r in rows])
    print(f"{'n':>5} " + " ".join(f"{m:>7}" for m in (*BENCH_METRICS, "Avg")))
    print(f"{len(rows):>5} " + " ".join(f"{agg[m]:>7.2f}" for m in (*BENCH_METRICS, "Avg")))
    if failures:
        print(f"{len(failures)} scenario(s) failed: {sorted(i for i, _ in failures)}", file=sys.stderr)
    return 0


def _load_jsonl(path: str, required: tuple[str, ...]) -> list[dict]:
    rows = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError:
            raise SchemaError(f"{path}:{n}: malformed JSON", field="<line>") from None
        if not isinstance(row, dict):
            raise SchemaError(f"{path}:{n}: expected an object", field="<line>")
        for k in required:
            if k not in row:
                raise SchemaError(f"{path}:{n}: missing field", field=k)
        rows.append(row)
    return rows


def stats_report(ratings: list[dict], judge: list[dict], judge_scale: str = "0-100") -> dict:
    """Per-metric agreement among raters and between the judge and the mean opinion score.

    ratings rows: {"metric", "item", "rater", "rating"}; judge rows: {"metric", "item", "score"}.
    """
    metrics = sorted({r["metric"] for r in ratings})
    out = {}
    for m in metrics:
        rows = [r for r in ratings if r["metric"] == m]
        raters = sorted({str(r["rater"]) for r in rows})
        items = sorted({str(r["item"]) for r in rows})
        grid = [[None] * len(items) for _ in raters]
        for r in rows:
            grid[raters.index(str(r["rater"]))][items.index(str(r["item"]))] = r["rating"]
        grid = agreement.check_likert(grid)
        scores = {str(j["item"]): float(j["score"]) for j in judge if j["metric"] == m}
        missing = [i for i in items if i not in scores]
        if missing:
            raise ValidationError(f"judge file lacks metric {m} for item(s) {missing[:5]}")
        mos = agreement.mean_opinion(grid)
        jv = [scores[i] for i in items]
        block = {"items": len(items), "raters": len(raters),
                 "alpha": agreement.krippendorff_alpha(grid, agreement.Metric.Interval),
                 "kappa": agreement.pairwise_kappa(grid)}
        block.update(agreement.correlation_suite(jv, mos.tolist(), judge_scale))
        out[m] = block
    return {"judge_scale": judge_scale, "metrics": out}


def cmd_stats(args) -> int:
    ratings = _load_jsonl(args.ratings, ("metric", "item", "rater", "rating"))
    judge = _load_jsonl(args.judge, ("metric", "item", "score"))
    report = stats_report(ratings, judge, args.judge_scale)
    text = json.dumps(report, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    print(f"{'metric':<8} {'alpha':>7} {'kappa':>7} {'r':>7} {'rho':>7} {'MAE':>7}")
    for m, b in report["metrics"].items():
        print(f"{m:<8} {b['alpha']:>7.3f} {b['kappa']:>7.3f} {b['pearson']:>7.3f} {b['spearman']:>7.3f} {b['mae']:>7.3f}")
    return 0


def cmd_report(args) -> int:
    target = Path(args.path)
    if target.is_file() and target.suffix == ".jsonl":
        from .verifiers import BenchScores

        rows = _read_results(target)
        if not rows:
            raise ConfigError(f"{target} has no results")
        agg = benchmark.aggregate([BenchScores.from_dict(r) for r in rows])
        print(json.dumps({"n": len(rows), **agg}, indent=2))
        return 0
    summary = target / "summary.json"
    if not summary.is_file():
        raise ConfigError(f"{target} is neither a run directory nor a results.jsonl file")
    data = json.loads(summary.read_text())
    policy = bandit.BanditPolicy.load(target / "policy.json")
    for it in data["iterations"]:
        cfg = it["config"]
        status = f"{it['aggregate']:.2f}" if it["aggregate"] is not None else f"failed: {it['error']}"
        print(f"iter-{it['iteration']}: {cfg['creative_strategy']} / {cfg['narrative_mode']} / "
              f"{cfg['aesthetic_archetype']}  {status}")
    if data["best_iteration"] is not None:
        print(f"best: iter-{data['best_iteration']} aggregate {data['best_aggregate']:.2f}")
    for d in policy.per_dimension:
        try:
            print(f"{d.value}: empirical best arm {bandit.best_arm(policy, d).label}")
        except VidstoryError:
            print(f"{d.value}: no arm pulled")
    return 0


# --- parser --------------------------------------------------------------------

def _add_engine_flags(p):
    p.add_argument("-T", type=int, help="bandit iterations (default 4)")
    p.add_argument("--max-retries", type=int, help="refinement retries per loop (default 3)")
    p.add_argument("--tau-l", type=float, help="storyline acceptance threshold (default 75)")
    p.add_argument("--tau-k", type=float, help="keyframe acceptance threshold (default 75)")
    p.add_argument("--exploration", type=float, help="UCB exploration constant (default sqrt 2)")
    p.add_argument("--scenes", type=int, help="scenes per storyboard (default 4)")
    p.add_argument("--runtime", type=float, help="target runtime in seconds (default 12)")
    p.add_argument("--backends", help="backend endpoint config (YAML or JSON)")
    p.add_argument("--muxer", help="muxer command template using {manifest} and {output}")
    p.add_argument("--env", help="sim environment JSON (with --sim)")
    p.add_argument("--no-warm-start", action="store_true", help="skip prior scoring of arms")
    p.add_argument("--force", action="store_true", help="replace an existing run directory")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="engine config file (YAML or JSON)")
    common.add_argument("--sim", action="store_true", default=argparse.SUPPRESS, help="use the simulation backend")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="scenario-level parallelism")
    common.add_argument("--out-dir", default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="vidstory", parents=[common],
                                     description="Bandit-steered video-ad generation engine.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run the optimization loop for one prompt")
    p.add_argument("--prompt", help="inline six-point prompt")
    p.add_argument("--scenario", help="scenario file (with --id)")
    p.add_argument("--id", type=int, default=0, help="scenario id")
    p.add_argument("--image", action="append", help="reference image (repeatable)")
    p.add_argument("--run-id")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", parents=[common], help="compare search policies on a sim environment")
    p.add_argument("--policy", default="mab", help=f"one of {', '.join(POLICIES)}")
    p.add_argument("-T", type=int, help="iterations (default 10)")
    p.add_argument("--repeats", type=int, default=200)
    p.add_argument("--prior-sigma", type=float, default=10.0)
    p.add_argument("--exploration", type=float)
    p.add_argument("--env", help="environment JSON")
    p.add_argument("--output", help="report path (default <out-dir>/simulate-<policy>-s<seed>.json)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", parents=[common], help="run and score every scenario of a benchmark file")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--results", help="results.jsonl path (default <out-dir>/results.jsonl)")
    p.add_argument("--resume", action="store_true", help="skip scenarios already in the results file")
    p.add_argument("--split", choices=[s.value for s in benchmark.Split])
    p.add_argument("--limit", type=int)
    _add_engine_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("stats", parents=[common], help="agreement statistics for judge vs human ratings")
    p.add_argument("--ratings", required=True, help="JSONL rows {metric, item, rater, rating}")
    p.add_argument("--judge", required=True, help="JSONL rows {metric, item, score}")
    p.add_argument("--judge-scale", choices=("0-100", "likert"), default="0-100")
    p.add_argument("--output")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", parents=[common], help="summarize a run directory or results.jsonl")
    p.add_argument("path")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("config", None), ("sim", False), ("seed", None), ("jobs", None), ("out_dir", None),
                          ("verbose", 0)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except VidstoryError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
