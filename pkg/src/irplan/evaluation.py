"""Plan scoring and corpus evaluation.

A plan is scored against per-step labels. Each step costs one time unit;
steps taken by an action labeled unnecessary cost two, the surcharge for
doing work the reference plan never needed. The ineffective fraction counts
steps that left the true system state unchanged, and a plan fails when it
was truncated or its run errored out.

On synthetic corpora the labels come from replaying the planned actions
through the model's true kernels: that replay, not the model's own
predictions, decides whether a step changed anything.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .domain import INITIAL_STATE, Incident, PlanResult
from .errors import ConfigError, PlanAborted, ScoringError
from .planner import PlannerConfig, plan
from .response_model import ResponseModel, SyntheticModel
from .rng import Stream


@dataclass(frozen=True)
class StepLabel:
    """Ground-truth judgment of one executed step."""

    effective: bool
    unnecessary: bool


@dataclass(frozen=True)
class PlanScore:
    """Scored outcome of one plan."""

    recovery_time: float
    ineffective_fraction: float
    failed: bool

    def to_json_dict(self) -> dict:
        return {
            "recovery_time": self.recovery_time,
            "ineffective_fraction": self.ineffective_fraction,
            "failed": self.failed,
        }


def score_plan(
    result: PlanResult, labels: Sequence[StepLabel], errored: bool = False
) -> PlanScore:
    """Combine a plan and its per-step labels into a score.

    recovery_time charges 1 per necessary step and 2 per unnecessary step;
    ineffective_fraction is the share of steps that changed nothing.
    """
    if len(labels) != len(result.steps):
        raise ScoringError(
            f"{len(result.steps)} steps but {len(labels)} labels"
        )
    recovery_time = float(
        sum(2.0 if label.unnecessary else 1.0 for label in labels)
    )
    if result.steps:
        ineffective = sum(1 for label in labels if not label.effective)
        ineffective_fraction = ineffective / len(labels)
    else:
        ineffective_fraction = 0.0
    return PlanScore(
        recovery_time=recovery_time,
        ineffective_fraction=ineffective_fraction,
        failed=result.truncated or errored,
    )


def synthetic_step_labels(
    model: SyntheticModel, result: PlanResult, stream: Stream
) -> list[StepLabel]:
    """Replay the plan's actions through the true kernels and label steps.

    A step is effective when the true state actually changed under it. Once
    the true system is terminal, remaining steps change nothing by
    definition. Unnecessary comes from the model's action label table.
    """
    labels = []
    true_state = INITIAL_STATE
    for step in result.steps:
        next_state = model.sample_true_next_state(true_state, step.action, stream)
        labels.append(
            StepLabel(
                effective=next_state != true_state,
                unnecessary=bool(model.unnecessary[step.action.synthetic_id]),
            )
        )
        true_state = next_state
    return labels


@dataclass(frozen=True)
class CorpusRow:
    dataset: str
    incident_id: str
    seed: int
    recovery_time: float
    ineffective_fraction: float
    failed: bool

    def to_json_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "incident_id": self.incident_id,
            "seed": self.seed,
            "recovery_time": self.recovery_time,
            "ineffective_fraction": self.ineffective_fraction,
            "failed": self.failed,
        }


@dataclass(frozen=True)
class MetricSummary:
    """Mean and population standard deviation per metric for one dataset."""

    count: int
    recovery_time_mean: float
    recovery_time_std: float
    ineffective_fraction_mean: float
    ineffective_fraction_std: float
    failed_rate: float

    def to_json_dict(self) -> dict:
        return {
            "count": self.count,
            "recovery_time_mean": self.recovery_time_mean,
            "recovery_time_std": self.recovery_time_std,
            "ineffective_fraction_mean": self.ineffective_fraction_mean,
            "ineffective_fraction_std": self.ineffective_fraction_std,
            "failed_rate": self.failed_rate,
        }


@dataclass(frozen=True)
class CorpusReport:
    rows: tuple[CorpusRow, ...]
    aggregates: dict[str, MetricSummary]
    errors: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "rows": [r.to_json_dict() for r in self.rows],
            "aggregates": {
                tag: summary.to_json_dict()
                for tag, summary in sorted(self.aggregates.items())
            },
            "errors": list(self.errors),
        }


def load_corpus(corpus_dir: str | Path) -> list[tuple[str, Incident]]:
    """Load (dataset tag, incident) pairs from a corpus directory.

    The directory holds incident JSON files plus ``manifest.json``, an
    object mapping file names to dataset tags.
    """
    corpus_dir = Path(corpus_dir)
    manifest_path = corpus_dir / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load corpus manifest: {exc}") from exc
    if not isinstance(manifest, dict) or not all(
        isinstance(v, str) for v in manifest.values()
    ):
        raise ConfigError("manifest.json must map incident files to dataset tags")
    pairs = []
    for file_name, tag in sorted(manifest.items()):
        path = corpus_dir / file_name
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load incident {file_name}: {exc}") from exc
        pairs.append((tag, Incident.from_json_dict(data)))
    return pairs


LabelFn = Callable[[ResponseModel, Incident, PlanResult, Stream], Sequence[StepLabel]]


def _default_labeler(
    model: ResponseModel, incident: Incident, result: PlanResult, stream: Stream
) -> Sequence[StepLabel]:
    if isinstance(model, SyntheticModel):
        return synthetic_step_labels(model, result, stream)
    raise ScoringError(
        "no label source for this backend; pass an explicit labeler"
    )


def run_corpus(
    corpus_dir: str | Path,
    model_factory: Callable[[Incident, int], ResponseModel],
    config: PlannerConfig,
    seeds: Sequence[int] = (0,),
    labeler: LabelFn = _default_labeler,
) -> CorpusReport:
    """Plan every corpus incident under every seed and aggregate scores.

    A failing incident (model construction, planning, labeling) is recorded
    in ``errors`` and, when a partial trajectory exists, still scored as a
    failed run; the sweep always continues.
    """
    pairs = load_corpus(corpus_dir)
    rows: list[CorpusRow] = []
    errors: list[str] = []
    for tag, incident in pairs:
        for seed in seeds:
            run_config = replace(config, seed=seed)
            label_stream = Stream(seed, 0x1AB31).child(
                _stable_id_hash(incident.id)
            )
            try:
                model = model_factory(incident, seed)
                result = plan(model, incident, run_config)
                errored = False
            except PlanAborted as exc:
                errors.append(f"{incident.id}/seed={seed}: {exc}")
                result = exc.partial_result
                errored = True
            except Exception as exc:  # noqa: BLE001 - sweep must survive
                errors.append(f"{incident.id}/seed={seed}: {exc}")
                continue
            try:
                labels = labeler(model, incident, result, label_stream)
                score = score_plan(result, labels, errored=errored)
            except Exception as exc:  # noqa: BLE001
                errors.append(f"{incident.id}/seed={seed}: scoring: {exc}")
                continue
            rows.append(
                CorpusRow(
                    dataset=tag,
                    incident_id=incident.id,
                    seed=seed,
                    recovery_time=score.recovery_time,
                    ineffective_fraction=score.ineffective_fraction,
                    failed=score.failed,
                )
            )
    return CorpusReport(
        rows=tuple(rows),
        aggregates=_aggregate(rows),
        errors=tuple(errors),
    )


def _stable_id_hash(text: str) -> int:
    import zlib

    return zlib.crc32(text.encode())


def _aggregate(rows: Sequence[CorpusRow]) -> dict[str, MetricSummary]:
    by_tag: dict[str, list[CorpusRow]] = {}
    for row in rows:
        by_tag.setdefault(row.dataset, []).append(row)
    out = {}
    for tag, tag_rows in by_tag.items():
        recovery = np.array([r.recovery_time for r in tag_rows])
        ineffective = np.array([r.ineffective_fraction for r in tag_rows])
        failed = np.array([r.failed for r in tag_rows], dtype=float)
        out[tag] = MetricSummary(
            count=len(tag_rows),
            recovery_time_mean=float(recovery.mean()),
            recovery_time_std=float(recovery.std()),
            ineffective_fraction_mean=float(ineffective.mean()),
            ineffective_fraction_std=float(ineffective.std()),
            failed_rate=float(failed.mean()),
        )
    return out


def emit_report(report: CorpusReport, fmt: str = "json") -> str:
    """Render a corpus report as JSON or CSV text.

    CSV rows carry the per-run scores with the ineffective share as a
    percentage; aggregates are JSON-only.
    """
    if fmt == "json":
        return json.dumps(report.to_json_dict(), indent=2)
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(
            ["dataset", "incident_id", "seed", "recovery_time",
             "ineffective_pct", "failed"]
        )
        for row in report.rows:
            writer.writerow([
                row.dataset,
                row.incident_id,
                row.seed,
                row.recovery_time,
                round(row.ineffective_fraction * 100.0, 6),
                row.failed,
            ])
        return buffer.getvalue()
    raise ConfigError(f"unknown report format {fmt!r}")
