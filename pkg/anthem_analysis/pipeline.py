#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Anthem / global-index pipeline
------------------------------
parse -> performance -> features -> ingest -> join -> standardize ->
cluster (anthems, each index) -> correlate -> qualitative tables -> render

Every stage writes plain CSV / JSON (and SVG) under the output directory so
stages can be re-run on their own; the run manifest records a sha256 of
every artifact written so identical inputs can be checked for identical
outputs.
"""

import hashlib
import json
import logging
import math
import os
import re
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from . import __version__
from .analysis import (ClusterModel, CorrelationReport, SelectionDiagnostics, build_correlation_report,
                       select_k, standardize)
from .config import RunConfig
from .errors import AnthemAnalysisError, ClusteringError, ConfigError, CountryNameError, EmptyPerformanceError
from .features import FEATURE_COLUMNS, FEATURE_LABELS, FeatureVector, extract_feature_vector, feature_frame
from .indices import (GLOBAL_INTERSECTION, IndexTable, JoinedDataset, join_corpus_indices,
                      load_index_table, normalize_country_name)
from .render import render_distributions_svg, render_heatmap_svg
from .score_model import Performance, build_performance
from .smf import parse_smf

logger = logging.getLogger(__name__)

MIDI_SUFFIXES = (".mid", ".midi", ".kar")
MANIFEST_FILE = "run_manifest.json"
SUCCESS, PARTIAL = "success", "partial"

_DUPLICATE_MARKER = re.compile(r"(\s*\(\d+\)|[_\s-]\d+)$")


# ---------------------
# Persistence
# ---------------------
def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serialisable: {type(value).__name__}")


def _finite_or_none(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def to_json_bytes(obj: Any) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False,
                       default=_json_default) + "\n").encode("utf-8")


def _safe_write(data: bytes, target_path: Path) -> None:
    """Write to a temp file next to the target, then move it into place."""
    target_path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = target_path.parent / f"{target_path.name}.tmp-{uuid.uuid4().hex}"
    try:
        temp_path.write_bytes(data)
        os.replace(str(temp_path), str(target_path))
    except OSError as e:
        logger.error(f"Could not write {target_path}: {e}")
        if temp_path.exists():
            temp_path.unlink()
        raise


class ArtifactWriter:
    """Writes artifacts under the output directory and remembers their hashes."""

    def __init__(self, output_dir: str):
        self.root = Path(output_dir)
        self.hashes: Dict[str, str] = {}

    def write_bytes(self, relative: str, data: bytes) -> Path:
        target = self.root / relative
        _safe_write(data, target)
        self.hashes[relative] = hashlib.sha256(data).hexdigest()
        logger.debug(f"Saved file: {target}")
        return target

    def write_csv(self, relative: str, frame: pd.DataFrame) -> Path:
        return self.write_bytes(relative, frame.to_csv(index=False, lineterminator="\n").encode("utf-8"))

    def write_json(self, relative: str, obj: Any) -> Path:
        return self.write_bytes(relative, to_json_bytes(obj))


# ---------------------
# Manifest
# ---------------------
@dataclass
class FileRecord:
    file: str
    country: Optional[str]
    status: str                  # admitted | dropped
    reason: Optional[str] = None
    notes: int = 0
    percussion_notes_dropped: int = 0
    repairs: List[str] = field(default_factory=list)


@dataclass
class RunManifest:
    tool_version: str
    command: str
    config: Dict[str, Any]
    files: List[FileRecord] = field(default_factory=list)
    index_rows: Dict[str, int] = field(default_factory=dict)
    join: Dict[str, Any] = field(default_factory=dict)
    chosen_k: Dict[str, Any] = field(default_factory=dict)
    undefined_correlations: List[List[str]] = field(default_factory=list)
    skipped: Dict[str, str] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)

    @property
    def admitted(self) -> List[FileRecord]:
        return [r for r in self.files if r.status == "admitted"]

    @property
    def dropped(self) -> List[FileRecord]:
        return [r for r in self.files if r.status == "dropped"]

    @property
    def status(self) -> str:
        return PARTIAL if self.dropped or self.skipped else SUCCESS

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tool_version": self.tool_version,
            "command": self.command,
            "status": self.status,
            "config": self.config,
            "counts": {
                "files_found": len(self.files),
                "admitted": len(self.admitted),
                "dropped": len(self.dropped),
            },
            "files": [asdict(r) for r in sorted(self.files, key=lambda r: r.file)],
            "index_rows": self.index_rows,
            "join": self.join,
            "chosen_k": self.chosen_k,
            "undefined_correlations": self.undefined_correlations,
            "skipped": self.skipped,
            "artifacts": dict(sorted(self.artifacts.items())),
        }


# ---------------------
# Corpus
# ---------------------
def country_from_filename(path: Path) -> str:
    """'United_States_2.mid' -> 'united states'."""
    stem = path.stem.replace("_", " ").strip()
    stem = _DUPLICATE_MARKER.sub("", stem).strip() or stem
    return normalize_country_name(stem)


def discover_corpus(corpus_dir: str) -> List[Path]:
    root = Path(corpus_dir)
    if not root.is_dir():
        raise ConfigError(f"corpus directory not found or not a directory: {root}")
    files = sorted((p for p in root.iterdir() if p.is_file() and p.suffix.lower() in MIDI_SUFFIXES),
                   key=lambda p: p.name)
    logger.info(f"Found {len(files)} MIDI files in {root}")
    return files


def process_midi_file(path: Path) -> Tuple[FileRecord, Optional[FeatureVector], Optional[Performance]]:
    """Parse one file into a feature vector; failures come back as a dropped record."""
    record = FileRecord(file=path.name, country=None, status="dropped")
    try:
        record.country = country_from_filename(path)
        data = path.read_bytes()
        if not data:
            record.reason = "empty file"
            return record, None, None
        smf = parse_smf(data)
        perf = build_performance(smf)
        vector = extract_feature_vector(perf, record.country)
    except CountryNameError:
        record.reason = "no country name in file name"
        return record, None, None
    except EmptyPerformanceError:
        record.reason = "no notes"
        return record, None, None
    except AnthemAnalysisError as e:
        record.reason = str(e)
        return record, None, None
    except OSError as e:
        record.reason = f"unreadable: {e}"
        return record, None, None

    record.status = "admitted"
    record.notes = len(perf.notes)
    record.percussion_notes_dropped = perf.percussion_dropped
    record.repairs = list(perf.repairs)
    return record, vector, perf


def _deduplicate(results):
    """Keep one file per country: most notes, then smallest file name."""
    by_country: Dict[str, list] = {}
    for result in results:
        record = result[0]
        if record.status == "admitted":
            by_country.setdefault(record.country, []).append(result)

    kept = []
    for country, candidates in sorted(by_country.items()):
        candidates.sort(key=lambda r: (-r[0].notes, r[0].file))
        kept.append(candidates[0])
        for duplicate in candidates[1:]:
            duplicate[0].status = "dropped"
            duplicate[0].reason = f"duplicate of {candidates[0][0].file}"
            logger.warning(f"{duplicate[0].file}: {duplicate[0].reason}")
    return kept


def _slug(country: str) -> str:
    return re.sub(r"[^0-9a-z]+", "_", country.lower()).strip("_") or "anthem"


# ---------------------
# Pipeline
# ---------------------
class AnthemPipeline:
    def __init__(self, config: RunConfig, command: str = "run"):
        self.config = config
        self.writer = ArtifactWriter(config.output_dir)
        echo = config.echo()
        echo.pop("output_dir", None)
        self.manifest = RunManifest(tool_version=__version__, command=command, config=echo)

    # -- extract --
    def extract(self) -> pd.DataFrame:
        files = discover_corpus(self.config.corpus_dir)
        if not files:
            raise ConfigError(f"no MIDI files ({', '.join(MIDI_SUFFIXES)}) in {self.config.corpus_dir}")

        results = Parallel(n_jobs=self.config.n_jobs, prefer="threads")(
            delayed(process_midi_file)(path) for path in files)
        for i, (record, _, _) in enumerate(results, 1):
            if record.status == "dropped":
                logger.warning(f"Dropped {record.file} ({i}/{len(files)}): {record.reason}")
            else:
                logger.info(f"Processed {record.file} ({i}/{len(files)}) -> {record.country}, {record.notes} notes")
                for repair in record.repairs:
                    logger.warning(f"{record.file}: {repair}")

        kept = _deduplicate(results)
        self.manifest.files = [r[0] for r in results]
        logger.info(f"Admitted {len(kept)} of {len(files)} anthems")
        if len(kept) < 2:
            raise AnthemAnalysisError(f"only {len(kept)} anthem(s) admitted; at least 2 are needed")

        features = feature_frame(vector for _, vector, _ in kept)
        if self.config.wants("csv"):
            self.writer.write_csv("features.csv", features)
        if self.config.wants("json"):
            self.writer.write_json("features.json", features.to_dict(orient="records"))
        if self.config.wants("svg"):
            for record, _, perf in kept:
                title = f"{record.country}: octave and beat distribution"
                self.writer.write_bytes(f"distributions/{_slug(record.country)}.svg",
                                        render_distributions_svg(perf, title))
        return features

    def load_features(self) -> pd.DataFrame:
        """features.csv from a previous extract, or a fresh extraction."""
        path = self.writer.root / "features.csv"
        if not path.exists():
            logger.info("No features.csv in the output directory, extracting the corpus first")
            return self.extract()
        features = pd.read_csv(path, keep_default_na=False, float_precision="round_trip")
        missing = [c for c in ("country", *FEATURE_COLUMNS) if c not in features.columns]
        if missing:
            raise AnthemAnalysisError(f"{path} is missing columns {missing}")
        logger.info(f"Loaded {len(features)} feature rows from {path}")
        return features

    # -- ingest --
    def ingest(self) -> List[IndexTable]:
        if not self.config.index_specs:
            raise ConfigError("indices: at least one index CSV must be configured")
        tables = []
        for spec in self.config.index_specs:
            table = load_index_table(spec)
            tables.append(table)
            self.manifest.index_rows[spec.name] = len(table.rows)
            if self.config.wants("csv"):
                self.writer.write_csv(f"indices/{spec.name}.csv", table.to_frame())
            if self.config.wants("json"):
                self.writer.write_json(f"indices/{spec.name}.json", {
                    "index": table.index_name,
                    "direction": table.direction,
                    "rows": [{"country": c, "score": s, "rank": r} for c, (s, r) in table.rows.items()],
                })
        return tables

    # -- join --
    def join(self, features: pd.DataFrame, tables: List[IndexTable]) -> JoinedDataset:
        joined = join_corpus_indices(features, tables, self.config.join_mode)
        self.manifest.join = {"mode": joined.mode, "provenance": joined.provenance}
        if self.config.wants("json"):
            self.writer.write_json("join_provenance.json", {"mode": joined.mode, "provenance": joined.provenance})

        if self.config.wants("csv"):
            if joined.mode == GLOBAL_INTERSECTION:
                wide = joined.features.join(joined.scores_frame()).reset_index()
                self.writer.write_csv("joined.csv", wide)
            else:
                for name in joined.index_names:
                    frame, scores = joined.view(name)
                    self.writer.write_csv(f"joined_{name}.csv", frame.assign(score=scores).reset_index())
        if self.config.wants("json"):
            per_index = {}
            for name in joined.index_names:
                frame, scores = joined.view(name)
                per_index[name] = frame.assign(score=scores).reset_index().to_dict(orient="records")
            self.writer.write_json("joined.json", {"mode": joined.mode, "countries": joined.countries,
                                                   "indices": per_index})
        return joined

    # -- cluster --
    def _select(self, data, label: str) -> Tuple[Optional[ClusterModel], Optional[SelectionDiagnostics]]:
        rows = len(data.values)
        k_max = min(self.config.k_max, rows)
        if k_max != self.config.k_max:
            logger.warning(f"{label}: k_max clamped from {self.config.k_max} to {k_max} ({rows} rows)")
        if k_max < 3:
            reason = f"too few rows ({rows}) for model selection"
            logger.warning(f"{label}: clustering skipped, {reason}")
            self.manifest.skipped[f"cluster:{label}"] = reason
            return None, None
        try:
            k, diagnostics, models = select_k(data, k_max, self.config.seed, self.config.n_jobs, self.config.max_iter)
        except ClusteringError as e:
            logger.warning(f"{label}: clustering skipped, {e}")
            self.manifest.skipped[f"cluster:{label}"] = str(e)
            return None, None
        return models[k], diagnostics

    def cluster(self, joined: JoinedDataset) -> Tuple[Optional[pd.Series], Dict[str, pd.Series]]:
        countries = pd.Index(joined.countries, name="country")
        diagnostics_out: Dict[str, Any] = {"seed": self.config.seed, "indices": {}}

        anthem_model, anthem_diag = self._select(standardize(joined.features), "anthems")
        anthem_clusters = None
        if anthem_model is not None:
            anthem_clusters = pd.Series(anthem_model.assignments, index=countries, name="anthem_cluster")
            diagnostics_out["anthems"] = anthem_diag.to_dict()
            self.manifest.chosen_k["anthems"] = anthem_model.k

        index_clusters: Dict[str, pd.Series] = {}
        for name in joined.index_names:
            scores = joined.index_scores[name]
            # scores only: ranks and names are not clustering inputs
            model, diag = self._select(standardize(scores.to_frame()), name)
            if model is None:
                diagnostics_out["indices"][name] = {"skipped": self.manifest.skipped[f"cluster:{name}"]}
                continue
            index_clusters[name] = pd.Series(model.assignments, index=scores.index, name=f"{name}_cluster")
            diagnostics_out["indices"][name] = diag.to_dict()
            self.manifest.chosen_k[name] = model.k

        if self.config.wants("json"):
            self.writer.write_json("cluster_diagnostics.json", diagnostics_out)
        if self.config.wants("csv"):
            table = pd.DataFrame(index=countries)
            if anthem_clusters is not None:
                table["anthem_cluster"] = anthem_clusters
            for name, labels in index_clusters.items():
                table[f"{name}_cluster"] = labels.reindex(countries).astype("Int64")
            self.writer.write_csv("cluster_assignments.csv", table.reset_index())
        return anthem_clusters, index_clusters

    # -- correlate --
    def correlate(self, joined: JoinedDataset, anthem_clusters: Optional[pd.Series],
                  index_clusters: Dict[str, pd.Series]) -> CorrelationReport:
        report = build_correlation_report(joined, anthem_clusters, index_clusters)
        self.manifest.undefined_correlations = [list(cell) for cell in report.undefined]
        for name, reason in report.skipped.items():
            self.manifest.skipped[f"qualitative:{name}"] = reason

        for method, matrix in (("pearson", report.pearson), ("spearman", report.spearman)):
            if self.config.wants("csv"):
                self.writer.write_csv(f"correlation_{method}.csv", matrix.rename_axis("feature").reset_index())
            if self.config.wants("json"):
                self.writer.write_json(f"correlation_{method}.json", {
                    "method": method,
                    "matrix": {feature: {index: _finite_or_none(float(v)) for index, v in row.items()}
                               for feature, row in matrix.iterrows()},
                    "undefined": self.manifest.undefined_correlations,
                })
        if self.config.wants("json"):
            self.writer.write_json("cluster_agreement.json",
                                   {name: agreement.to_dict() for name, agreement in report.cluster_agreement.items()})

        for name, table in report.qualitative.items():
            payload = table.to_dict()
            if self.config.wants("csv"):
                self.writer.write_csv(f"qualitative/{name}.csv", pd.DataFrame(payload["rows"]))
            if self.config.wants("json"):
                self.writer.write_json(f"qualitative/{name}.json", payload)
        return report

    # -- report --
    def render(self, report: CorrelationReport) -> None:
        if not self.config.wants("svg"):
            return
        undefined_rows = {feature for feature, _ in report.undefined}
        rows = [f for f in FEATURE_COLUMNS if f not in undefined_rows]
        if undefined_rows:
            logger.warning(f"Heatmaps omit features with undefined correlations: {sorted(undefined_rows)}")
        if not rows:
            self.manifest.skipped["heatmaps"] = "every feature has an undefined correlation"
            return
        for method, matrix in (("pearson", report.pearson), ("spearman", report.spearman)):
            svg = render_heatmap_svg(matrix.loc[rows], row_labels=[FEATURE_LABELS[f] for f in rows],
                                     title=f"{method.capitalize()} correlation: anthem features x indices")
            self.writer.write_bytes(f"heatmap_{method}.svg", svg)

    def finish(self) -> RunManifest:
        self.manifest.artifacts = dict(self.writer.hashes)
        _safe_write(to_json_bytes(self.manifest.to_dict()), self.writer.root / MANIFEST_FILE)
        logger.info(f"Manifest written to {self.writer.root / MANIFEST_FILE} ({self.manifest.status})")
        return self.manifest


def run_stages(config: RunConfig, command: str = "run") -> Tuple[RunManifest, Optional[CorrelationReport]]:
    """Run the stages a subcommand needs and write the manifest."""
    pipeline = AnthemPipeline(config, command)
    report = None
    if command == "extract":
        pipeline.extract()
    elif command == "ingest":
        pipeline.ingest()
    else:
        features = pipeline.extract() if command == "run" else pipeline.load_features()
        joined = pipeline.join(features, pipeline.ingest())
        anthem_clusters, index_clusters = pipeline.cluster(joined)
        if command in ("correlate", "report", "run"):
            report = pipeline.correlate(joined, anthem_clusters, index_clusters)
        if command in ("report", "run"):
            pipeline.render(report)
    return pipeline.finish(), report


def run_pipeline(config: RunConfig) -> RunManifest:
    """End-to-end run: every stage, every artifact, one manifest."""
    manifest, _ = run_stages(config, "run")
    return manifest


# ---------------------
# Console summary
# ---------------------
def print_summary(manifest: RunManifest, report: Optional[CorrelationReport] = None) -> None:
    print("\n" + "=" * 100)
    print(f"ANTHEM / INDEX ANALYSIS - {manifest.command.upper()} ({manifest.status})")
    print("=" * 100)
    print(f"Files found: {len(manifest.files)} | admitted: {len(manifest.admitted)} | "
          f"dropped: {len(manifest.dropped)}")
    for record in manifest.dropped:
        print(f"  - {record.file:<40} {record.reason}")
    if manifest.chosen_k:
        print("\nChosen k: " + ", ".join(f"{name}={k}" for name, k in manifest.chosen_k.items()))
    if report is None:
        print("=" * 100)
        return

    for name, table in report.qualitative.items():
        favourable = f"favourable group: {table.favourable_group}"
        print(f"\n{name.upper()} ({table.direction}, {favourable}; Low n={table.low_count}, High n={table.high_count})")
        print("-" * 60)
        print(f"{'Feature':<26}{'Low':<17}{'High':<17}")
        for feature in table.labels.index:
            print(f"{FEATURE_LABELS[feature]:<26}{table.labels.loc[feature, 'Low']:<17}"
                  f"{table.labels.loc[feature, 'High']:<17}")

    print("\nStrongest Spearman correlations:")
    stacked = report.spearman.stack().dropna()
    for (feature, index), value in stacked.reindex(stacked.abs().sort_values(ascending=False).index).head(5).items():
        print(f"  {FEATURE_LABELS[feature]:<26} x {index:<20} {value:+.3f}")
    if manifest.skipped:
        print("\nSkipped:")
        for what, reason in manifest.skipped.items():
            print(f"  - {what}: {reason}")
    print("=" * 100)
