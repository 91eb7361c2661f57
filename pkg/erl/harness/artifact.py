"""Run results and their on-disk layout.

A run directory holds one ``trace_<label>_<init>.csv`` per solver run,
``summary.csv`` with the per-iteration mean and standard deviation of every label,
``thresholds.csv`` with iterations-to-threshold of each mean trace, and ``run.json``
with the config snapshot, identity residuals and ordering verdicts. Everything in
these files is a function of the config and seed only.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from erl.core.io import save_solution, trace_to_csv
from erl.core.solver import ConvergenceTrace, SoftSolution
from erl.harness.config import ExperimentConfig
from erl.harness.plotting import save_convergence_svg

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["iteration", "mean_error", "std_error", "label"]
THRESHOLD_COLUMNS = ["label", "threshold", "iterations"]


class RunArtifact(BaseModel):
    config: ExperimentConfig
    traces: Dict[str, List[ConvergenceTrace]] = Field(default_factory=dict)
    solutions: Dict[str, SoftSolution] = Field(default_factory=dict)
    residuals: Dict[str, float] = Field(default_factory=dict)
    verdicts: Dict[str, Any] = Field(default_factory=dict)
    extras: Dict[str, Any] = Field(default_factory=dict)
    tables: Dict[str, List[Dict[str, Any]]] = Field(default_factory=dict)
    # wall-clock and memory readings; kept out of run.json so reruns compare equal
    resources: Dict[str, Any] = Field(default_factory=dict)

    class Config:
        arbitrary_types_allowed = True

    def add_traces(self, label: str, traces: List[ConvergenceTrace]) -> None:
        self.traces.setdefault(label, []).extend(traces)

    def label_summary(self, label: str) -> pd.DataFrame:
        traces = self.traces[label]
        length = max((t.iterations for t in traces), default=0)
        if length == 0:
            return pd.DataFrame(columns=SUMMARY_COLUMNS)
        # a finished run keeps reporting its final error for the rest of the window
        padded = np.array(
            [
                np.pad(t.errors, (0, length - t.iterations), mode="edge")
                if t.iterations
                else np.zeros(length)
                for t in traces
            ]
        )
        return pd.DataFrame(
            {
                "iteration": np.arange(1, length + 1),
                "mean_error": padded.mean(axis=0),
                "std_error": padded.std(axis=0, ddof=0),
                "label": label,
            }
        )

    def summary(self) -> pd.DataFrame:
        frames = [self.label_summary(label) for label in self.traces]
        frames = [frame for frame in frames if not frame.empty]
        if not frames:
            return pd.DataFrame(columns=SUMMARY_COLUMNS)
        return pd.concat(frames, ignore_index=True)

    def iterations_to(self, label: str, threshold: float) -> Optional[int]:
        frame = self.label_summary(label)
        hits = frame.loc[frame["mean_error"] <= threshold, "iteration"]
        return int(hits.iloc[0]) if len(hits) else None

    def thresholds(self) -> pd.DataFrame:
        rows = [
            {
                "label": label,
                "threshold": threshold,
                "iterations": self.iterations_to(label, threshold),
            }
            for label in self.traces
            for threshold in self.config.thresholds
        ]
        frame = pd.DataFrame(rows, columns=THRESHOLD_COLUMNS)
        frame["iterations"] = frame["iterations"].astype("Int64")
        return frame

    def faster_at(self, fast: str, slow: str) -> Dict[str, bool]:
        """Per threshold, whether ``fast``'s mean trace gets there in fewer sweeps."""
        verdict = {}
        for threshold in self.config.thresholds:
            fast_hit = self.iterations_to(fast, threshold)
            slow_hit = self.iterations_to(slow, threshold)
            verdict[repr(threshold)] = fast_hit is not None and (
                slow_hit is None or fast_hit < slow_hit
            )
        return verdict

    def run_record(self) -> Dict[str, Any]:
        return {
            "config": self.config.model_dump(mode="json"),
            "residuals": self.residuals,
            "verdicts": self.verdicts,
            "extras": self.extras,
            "num_traces": {label: len(traces) for label, traces in self.traces.items()},
        }


def emit_outputs(
    artifact: RunArtifact, output_dir: Union[str, Path], svg: bool = False
) -> List[Path]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    for label, traces in artifact.traces.items():
        for init, trace in enumerate(traces):
            path = out / f"trace_{label}_{init}.csv"
            trace_to_csv(trace, path)
            written.append(path)

    summary = artifact.summary()
    summary.to_csv(out / "summary.csv", index=False)
    artifact.thresholds().to_csv(out / "thresholds.csv", index=False)
    written += [out / "summary.csv", out / "thresholds.csv"]

    for name, rows in artifact.tables.items():
        path = out / f"{name}.csv"
        pd.DataFrame(rows).to_csv(path, index=False)
        written.append(path)

    for label, solution in artifact.solutions.items():
        path = out / f"solution_{label}.json"
        save_solution(solution, path)
        written.append(path)

    run_json = out / "run.json"
    run_json.write_text(json.dumps(artifact.run_record(), indent=2, sort_keys=True))
    written.append(run_json)

    if artifact.resources:
        path = out / "resources.json"
        path.write_text(json.dumps(artifact.resources, indent=2, sort_keys=True))
        written.append(path)

    if svg:
        written.append(save_convergence_svg(summary, out / "convergence.svg", artifact.config.name))

    logger.info(f"Wrote {len(written)} files to {out}")
    return written
