"""Command-line front end.

Subcommands cover the whole engine: batch planning, the statistical
verification suites, hallucination-rate estimation, corpus evaluation, the
latency benchmark, and the HTTP service. A JSON config file can preload the
planner / llm / synthetic sections; the global --seed overrides whatever seed
the config carries.
"""

from __future__ import annotations

import csv
import io
import json
import zlib
from pathlib import Path

import click

from .domain import Incident
from .errors import ConfigError, IrplanError, PlanAborted, ScoringError
from .planner import PlannerConfig, plan
from .response_model import SyntheticConfig, build_synthetic
from .rng import Stream

_ESTIMATE_SALT = 0xE57


def _load_sections(config_path: str | None) -> dict:
    if not config_path:
        return {}
    try:
        data = json.loads(Path(config_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _friendly(fn):
    """Convert engine errors into clean CLI failures."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PlanAborted as exc:
            raise click.ClickException(
                f"{exc} (partial trajectory of {len(exc.partial_result.steps)} "
                "steps discarded; re-run with a fixture or healthier backend)"
            ) from exc
        except IrplanError as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _rows_to_csv(rows, fields) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields))
    writer.writeheader()
    for row in rows:
        writer.writerow({f: getattr(row, f) for f in fields})
    return buf.getvalue()


def _load_incident(path: str) -> Incident:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read incident file: {exc}") from exc
    return Incident.from_json_dict(data)


def _planner_config(ctx_obj: dict, **overrides) -> PlannerConfig:
    section = dict(ctx_obj.get("sections", {}).get("planner", {}))
    given = {k: v for k, v in overrides.items() if v is not None}
    section.update(given)
    # precedence: subcommand --seed, then global --seed, then the config file
    if "seed" not in given and ctx_obj.get("seed") is not None:
        section["seed"] = ctx_obj["seed"]
    return PlannerConfig.from_json_dict(section)


def _synthetic_config(ctx_obj: dict, seed: int | None = None) -> SyntheticConfig:
    section = dict(ctx_obj.get("sections", {}).get("synthetic", {}))
    if seed is not None:
        section["seed"] = seed
    return SyntheticConfig.from_json_dict(section)


def _synthetic_for_incident(
    ctx_obj: dict, incident: Incident, seed: int
):
    # Same derivation the session service uses, so `plan` and a session over
    # the same incident and seed agree action for action.
    mixed = Stream(seed).child(zlib.crc32(incident.id.encode())).key
    return build_synthetic(_synthetic_config(ctx_obj, seed=mixed))


def _llm_model(ctx_obj: dict, mode: str, fixture: str | None):
    from .llm_backend import LlmConfig, LlmModel

    section = ctx_obj.get("sections", {}).get("llm")
    if not section:
        raise ConfigError(
            "--backend llm needs an 'llm' section in the --config file "
            "(endpoint_url, model_name, ...)"
        )
    return LlmModel(
        LlmConfig.from_json_dict(section), mode=mode, fixture_path=fixture
    )


@click.group()
@click.option("--seed", type=int, default=None, help="Override every configured seed.")
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON file with planner / llm / synthetic sections.",
)
@click.pass_context
def main(ctx, seed, config_path):
    """Incident response planning engine."""
    ctx.ensure_object(dict)
    try:
        ctx.obj["sections"] = _load_sections(config_path)
    except IrplanError as exc:
        raise click.ClickException(str(exc)) from exc
    ctx.obj["seed"] = seed


@main.command("plan")
@click.option("--incident", "incident_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", type=click.Choice(["synthetic", "llm"]), default="synthetic")
@click.option("--n", "n_candidates", type=int, default=None, help="Candidates per step.")
@click.option("--m", "m_samples", type=int, default=None, help="Rollouts per candidate.")
@click.option("--seed", type=int, default=None)
@click.option("--exact", is_flag=True, help="Exact-expectation evaluation (synthetic only).")
@click.option("--llm-mode", type=click.Choice(["live", "record", "replay"]), default="live")
@click.option("--fixture", type=click.Path(dir_okay=False), default=None, help="Record/replay fixture path.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
@_friendly
def plan_cmd(ctx, incident_path, backend, n_candidates, m_samples, seed, exact, llm_mode, fixture, out):
    """Plan one incident and write the trajectory as JSON."""
    incident = _load_incident(incident_path)
    config = _planner_config(
        ctx.obj,
        n_candidates=n_candidates,
        m_samples=m_samples,
        seed=seed,
        exact_expectation=True if exact else None,
    )
    if backend == "synthetic":
        model = _synthetic_for_incident(ctx.obj, incident, config.seed)
    else:
        model = _llm_model(ctx.obj, llm_mode, fixture)
    result = plan(model, incident, config)
    _emit(json.dumps(result.to_json_dict(), indent=2) + "\n", out)
    click.echo(
        f"{'terminal' if result.reached_terminal else 'truncated'} "
        f"after {len(result.steps)} steps",
        err=True,
    )


@main.group()
def verify():
    """Statistical suites backing the engine's guarantees (CSV per trial)."""


@verify.command("lemma1")
@click.option("--count", type=int, default=1000, show_default=True)
@click.option("--lambda-max", type=float, default=0.3, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
@_friendly
def verify_lemma1(ctx, count, lambda_max, out):
    """Value-gap bound over randomized models."""
    from .verify import ValueGapTrial, run_lemma1_trials

    trials = run_lemma1_trials(count, seed=ctx.obj.get("seed") or 0, lambda_max=lambda_max)
    _emit(_rows_to_csv(trials, ValueGapTrial.csv_fields), out)
    holds = sum(t.holds for t in trials)
    click.echo(f"{holds}/{len(trials)} trials hold", err=True)


@verify.command("prop1")
@click.option("--count", type=int, default=500, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
@_friendly
def verify_prop1(ctx, count, out):
    """Filter-condition planner guarantee over randomized models."""
    from .verify import FilterTrial, run_prop1_trials

    trials = run_prop1_trials(count, seed=ctx.obj.get("seed") or 0)
    _emit(_rows_to_csv(trials, FilterTrial.csv_fields), out)
    violations = sum(t.violations for t in trials)
    guarded = sum(t.guarded_points for t in trials)
    click.echo(f"{violations} violations across {guarded} guarded decision points", err=True)


@verify.command("prop2")
@click.option("--rate", type=float, default=0.3, show_default=True)
@click.option("--samples", type=int, default=30, show_default=True)
@click.option("--epsilon", type=float, default=0.2, show_default=True)
@click.option("--trials", type=int, default=100_000, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
@_friendly
def verify_prop2(ctx, rate, samples, epsilon, trials, out):
    """Estimator concentration versus its analytic bound."""
    from .verify import EstimatorTrialSummary, run_prop2_trial

    summary = run_prop2_trial(
        true_rate=rate,
        sample_count=samples,
        epsilon=epsilon,
        trials=trials,
        seed=ctx.obj.get("seed") or 0,
    )
    _emit(_rows_to_csv([summary], EstimatorTrialSummary.csv_fields), out)
    click.echo(
        f"empirical {summary.empirical_failure_rate:.5f} "
        f"vs bound {summary.hoeffding_bound:.5f}",
        err=True,
    )


@main.command("estimate-h")
@click.option("--samples", type=int, default=30, show_default=True, help="Proposal draws (L).")
@click.option("--confidence", type=float, default=0.99, show_default=True)
@click.option("--n", "n_candidates", type=int, default=3, show_default=True, help="Candidate-set size for the joint bound.")
@click.option("--labels", "labels_path", type=click.Path(exists=True, dir_okay=False), default=None, help="JSON {action text: bool} oracle (llm mode).")
@click.option("--backend", type=click.Choice(["synthetic", "llm"]), default="synthetic")
@click.option("--incident", "incident_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--llm-mode", type=click.Choice(["live", "record", "replay"]), default="live")
@click.option("--fixture", type=click.Path(dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
@_friendly
def estimate_h(ctx, samples, confidence, n_candidates, labels_path, backend, incident_path, llm_mode, fixture, out):
    """Estimate the proposal hallucination rate with its confidence envelope."""
    from .hallucination import estimate_confidence, estimate_from_samples, joint_bound
    from .verify import synthetic_probe_incident

    seed = ctx.obj.get("seed") or 0
    incident = (
        _load_incident(incident_path) if incident_path else synthetic_probe_incident()
    )
    oracle = None
    if labels_path:
        table = json.loads(Path(labels_path).read_text())
        if not isinstance(table, dict):
            raise ConfigError("labels file must map action text to booleans")

        def oracle(action):
            try:
                return bool(table[action.text])
            except KeyError:
                raise ScoringError(f"no label for action {action.text!r}") from None

    if backend == "synthetic":
        model = _synthetic_for_incident(ctx.obj, incident, seed)
    else:
        model = _llm_model(ctx.obj, llm_mode, fixture)
        if oracle is None:
            raise ConfigError("--backend llm needs --labels for the oracle")
    estimate = estimate_from_samples(
        model,
        incident,
        samples,
        confidence,
        n_candidates,
        Stream(seed, _ESTIMATE_SALT),
        oracle=oracle,
    )
    # Companion tables: confidence as the sample count grows at this epsilon,
    # and the joint bound as the candidate set grows at this h-bar + epsilon.
    confidence_curve = [
        {
            "sample_count": l,
            "epsilon": estimate.epsilon,
            "confidence": estimate_confidence(estimate.epsilon, l),
        }
        for l in (1, 5, 10, 20, 30, 50, 75, 100)
    ]
    joint_curve = [
        {
            "n_candidates": n,
            "rate_plus_epsilon": min(1.0, estimate.empirical_rate + estimate.epsilon),
            "joint_bound": joint_bound(estimate.empirical_rate, estimate.epsilon, n),
        }
        for n in range(1, 11)
    ]
    payload = {
        "estimate": estimate.to_json_dict(),
        "confidence_vs_samples": confidence_curve,
        "joint_bound_vs_candidates": joint_curve,
    }
    _emit(json.dumps(payload, indent=2) + "\n", out)


@main.command("evaluate")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--seeds", default="0", show_default=True, help="Comma-separated seeds.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
@click.option("--exact", is_flag=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
@_friendly
def evaluate_cmd(ctx, corpus_dir, seeds, fmt, exact, out):
    """Plan a corpus under several seeds and aggregate the metrics."""
    from .evaluation import emit_report, run_corpus

    try:
        seed_list = [int(s) for s in seeds.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --seeds value: {exc}") from exc
    if not seed_list:
        raise ConfigError("--seeds must name at least one seed")
    config = _planner_config(ctx.obj, exact_expectation=True if exact else None)

    def factory(incident: Incident, seed: int):
        return _synthetic_for_incident(ctx.obj, incident, seed)

    report = run_corpus(corpus_dir, factory, config, seeds=seed_list)
    _emit(emit_report(report, fmt), out)
    if report.errors:
        click.echo(f"{len(report.errors)} incident runs failed", err=True)


@main.command("bench-scaling")
@click.option("--latency-ms", type=float, default=50.0, show_default=True)
@click.option("--n-values", default="1,2,3,4", show_default=True)
@click.option("--repeats", type=int, default=3, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
@_friendly
def bench_scaling(ctx, latency_ms, n_values, repeats, out):
    """Measure candidate-evaluation wall time, sequential vs parallel."""
    from .bench import measure_scaling

    try:
        ns = tuple(int(s) for s in n_values.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(f"bad --n-values: {exc}") from exc
    points = measure_scaling(
        n_values=ns,
        latency_s=latency_ms / 1000.0,
        repeats=repeats,
        seed=ctx.obj.get("seed") or 0,
    )
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["n_candidates", "mode", "seconds"])
    for p in points:
        writer.writerow([p.n_candidates, p.mode, f"{p.seconds:.6f}"])
    _emit(buf.getvalue(), out)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--snapshot-dir", type=click.Path(file_okay=False), default=None)
@click.option("--console-dir", type=click.Path(file_okay=False), default=None, help="Static console build to serve at /.")
@click.pass_context
@_friendly
def serve_cmd(ctx, host, port, snapshot_dir, console_dir):
    """Run the session HTTP API (and optionally the operator console)."""
    import uvicorn

    from .service import SessionStore, create_app, synthetic_model_provider

    base = _synthetic_config(ctx.obj)
    store = SessionStore(
        synthetic_model_provider(base), snapshot_dir=snapshot_dir
    )
    if console_dir is None:
        default_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        console_dir = str(default_dir) if default_dir.is_dir() else None
    app = create_app(store, console_dir=console_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
