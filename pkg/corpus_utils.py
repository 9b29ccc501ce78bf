#!/usr/bin/env python3
"""
Corpus Utilities - Helper functions for the Anthem Index Analyzer
"""

import json
from pathlib import Path
from typing import Dict, Optional

import pandas as pd

from anthem_analysis.features import FEATURE_COLUMNS, FEATURE_LABELS


def quick_feature_summary(csv_file) -> Optional[pd.DataFrame]:
    """Per-feature statistics of a features.csv file."""
    try:
        df = pd.read_csv(csv_file, keep_default_na=False)
    except Exception as e:
        print(f"Error reading file: {e}")
        return None

    missing = [c for c in FEATURE_COLUMNS if c not in df.columns]
    if missing:
        print(f"{csv_file} is not a feature store (missing {missing})")
        return None

    stats = df[list(FEATURE_COLUMNS)].agg(["mean", "std", "min", "median", "max"]).T
    stats.index = [FEATURE_LABELS[c] for c in stats.index]
    print(f"\nQuick Summary of {csv_file}:")
    print(f"Anthems: {len(df)}")
    print(stats.round(3).to_string())

    print("\nFastest 5 anthems:")
    print(df.nlargest(5, "tempo_bpm")[["country", "tempo_bpm", "pitch_mode"]].to_string(index=False))
    return stats


def compare_manifests(first, second) -> Dict[str, str]:
    """Artifacts whose hashes differ between two run manifests.

    Values are 'changed', 'only in first' or 'only in second'.
    """
    with open(first, "r", encoding="utf-8") as f:
        a = json.load(f).get("artifacts", {})
    with open(second, "r", encoding="utf-8") as f:
        b = json.load(f).get("artifacts", {})

    differences = {}
    for name in sorted(set(a) | set(b)):
        if name not in b:
            differences[name] = "only in first"
        elif name not in a:
            differences[name] = "only in second"
        elif a[name] != b[name]:
            differences[name] = "changed"
    return differences


def list_dropped_files(manifest_file) -> pd.DataFrame:
    with open(manifest_file, "r", encoding="utf-8") as f:
        files = json.load(f).get("files", [])
    dropped = pd.DataFrame([r for r in files if r["status"] == "dropped"], columns=["file", "country", "reason"])
    print(f"Dropped files: {len(dropped)}")
    if not dropped.empty:
        print(dropped.to_string(index=False))
    return dropped


if __name__ == "__main__":
    import sys

    if len(sys.argv) > 1:
        command = sys.argv[1]

        if command == "summary" and len(sys.argv) > 2:
            quick_feature_summary(sys.argv[2])
        elif command == "compare" and len(sys.argv) > 3:
            diff = compare_manifests(sys.argv[2], sys.argv[3])
            if not diff:
                print("Manifests match: every artifact hash is identical")
            for name, what in diff.items():
                print(f"  {name}: {what}")
            sys.exit(1 if diff else 0)
        elif command == "dropped" and len(sys.argv) > 2:
            list_dropped_files(Path(sys.argv[2]))
        else:
            print("Usage:")
            print("  python corpus_utils.py summary <features.csv>")
            print("  python corpus_utils.py compare <run_manifest.json> <run_manifest.json>")
            print("  python corpus_utils.py dropped <run_manifest.json>")
    else:
        print("Available utilities:")
        print("- summary: Per-feature statistics of a feature store")
        print("- compare: Artifact hash differences between two runs")
        print("- dropped: Files left out of a run and why")
