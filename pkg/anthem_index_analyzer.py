#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
National Anthem / Global Index Analyzer
---------------------------------------
What it does:
- Parses a directory of national-anthem MIDI files (one file per country)
- Extracts eight musical features per anthem (contour, pitch, beat density,
  tempo, velocity, note duration, rest duration, time signature changes)
- Joins them with global index CSVs (peace, suicide, crime, happiness,
  human development) on canonical country names
- Clusters anthems and indices with seeded K-means, correlates features
  with indices and writes CSV / JSON / SVG results plus a run manifest

Requirements:
    pip install -r requirements.txt

Usage:
    python anthem_index_analyzer.py                      # uses anthem_config.json
    python anthem_index_analyzer.py --seed 7 --out results
    python -m anthem_analysis --help                     # individual stages
"""

import os
import sys

from anthem_analysis.cli import main

CONFIG_FILE = "anthem_config.json"

if __name__ == "__main__":
    argv = ["run", *sys.argv[1:]]
    if "--config" not in argv and os.path.exists(CONFIG_FILE):
        argv += ["--config", CONFIG_FILE]
    main(argv)
