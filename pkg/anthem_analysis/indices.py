"""
Global-index ingestion: CSV parsing, country-name canonicalisation and the
join against the anthem feature store.

Only the country, score and (optional) rank columns of an index file are
kept; everything else in the file is ignored.
"""

import io
import logging
import math
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from .errors import CountryNameError, IndexCsvError, JoinError
from .features import FEATURE_COLUMNS

logger = logging.getLogger(__name__)

HIGHER_IS_BETTER = "higher_is_better"
HIGHER_IS_WORSE = "higher_is_worse"
DIRECTIONS = (HIGHER_IS_BETTER, HIGHER_IS_WORSE)

GLOBAL_INTERSECTION = "global_intersection"
PER_INDEX = "per_index"
JOIN_MODES = (GLOBAL_INTERSECTION, PER_INDEX)

ALIAS_FILE = Path(__file__).parent / "data" / "country_aliases.csv"

ColumnRef = Union[str, int]

_QUOTES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'", "`": "'"})


@dataclass(frozen=True)
class IndexSpec:
    name: str
    direction: str
    country_column: ColumnRef = 0
    score_column: ColumnRef = 1
    rank_column: Optional[ColumnRef] = None
    path: Optional[str] = None


@dataclass
class IndexTable:
    index_name: str
    direction: str
    rows: Dict[str, Tuple[float, Optional[int]]] = field(default_factory=dict)

    def scores(self) -> pd.Series:
        countries = sorted(self.rows)
        return pd.Series([self.rows[c][0] for c in countries], index=pd.Index(countries, name="country"),
                         name=self.index_name, dtype=float)

    def to_frame(self) -> pd.DataFrame:
        countries = sorted(self.rows)
        return pd.DataFrame({
            "country": countries,
            "score": [self.rows[c][0] for c in countries],
            "rank": pd.array([self.rows[c][1] for c in countries], dtype="Int64"),
        })


# ---------------------
# Country names
# ---------------------
def _fold_once(text: str) -> str:
    text = unicodedata.normalize("NFKD", text)
    text = "".join(ch for ch in text if not unicodedata.combining(ch))
    text = text.translate(_QUOTES).casefold()
    return " ".join(text.split())


def _fold(text: str) -> str:
    for _ in range(4):
        folded = _fold_once(text)
        if folded == text:
            break
        text = folded
    return text


@lru_cache(maxsize=4)
def load_aliases(path: Optional[str] = None) -> Dict[str, str]:
    """Folded alias -> folded canonical name, with alias chains resolved."""
    table = pd.read_csv(path or ALIAS_FILE, comment="#", dtype=str, keep_default_na=False)
    raw = {_fold(a): _fold(c) for a, c in zip(table["alias"], table["canonical"]) if _fold(a)}

    resolved = {}
    for alias, target in raw.items():
        seen = {alias}
        while target in raw and target not in seen:
            seen.add(target)
            target = raw[target]
        resolved[alias] = target
    for canonical in set(resolved.values()):
        resolved[canonical] = canonical
    return resolved


def normalize_country_name(raw: str, aliases: Optional[Dict[str, str]] = None) -> str:
    """Trim, case-fold, strip diacritics, collapse whitespace, apply aliases."""
    folded = _fold(str(raw))
    if not folded:
        raise CountryNameError("empty country name")
    table = load_aliases() if aliases is None else aliases
    return table.get(folded, folded)


# ---------------------
# Index CSV files
# ---------------------
def _resolve_column(columns: List[str], ref: ColumnRef, role: str, index_name: str) -> str:
    if isinstance(ref, int) and not isinstance(ref, bool):
        if 0 <= ref < len(columns):
            return columns[ref]
    elif ref in columns:
        return ref
    raise IndexCsvError(f"{index_name}: mapped {role} column {ref!r} not found in header {columns}")


def parse_index_csv(text: str, spec: IndexSpec) -> IndexTable:
    """Parse one index CSV into an IndexTable.

    Row numbers in error messages count the header as row 1.
    """
    if spec.direction not in DIRECTIONS:
        raise IndexCsvError(f"{spec.name}: unknown direction {spec.direction!r}")
    try:
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False, skip_blank_lines=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IndexCsvError(f"{spec.name}: unreadable CSV ({e})")

    frame = frame.fillna("")
    columns = [str(c) for c in frame.columns]
    frame.columns = columns
    country_col = _resolve_column(columns, spec.country_column, "country", spec.name)
    score_col = _resolve_column(columns, spec.score_column, "score", spec.name)
    rank_col = (_resolve_column(columns, spec.rank_column, "rank", spec.name)
                if spec.rank_column is not None else None)

    ranks = frame[rank_col].tolist() if rank_col else [""] * len(frame)
    errors: List[str] = []
    rows: Dict[str, Tuple[float, Optional[int]]] = {}
    source_rows: Dict[str, int] = {}

    blank = [not any(v.strip() for v in row) for row in frame.itertuples(index=False)]
    for i, (raw_country, raw_score, raw_rank) in enumerate(zip(frame[country_col], frame[score_col], ranks)):
        if blank[i]:
            continue
        row_number = i + 2
        try:
            country = normalize_country_name(raw_country)
        except CountryNameError:
            errors.append(f"row {row_number}: empty country name")
            continue

        try:
            score = float(raw_score.strip())
        except ValueError:
            score = math.nan
        if not math.isfinite(score):
            errors.append(f"row {row_number}: unparseable score {raw_score!r}")
            continue

        rank = None
        if raw_rank.strip():
            try:
                value = float(raw_rank.strip())
            except ValueError:
                value = math.nan
            if not (math.isfinite(value) and value.is_integer() and value >= 1):
                errors.append(f"row {row_number}: unparseable rank {raw_rank!r}")
                continue
            rank = int(value)

        if country in rows:
            errors.append(f"rows {source_rows[country]} and {row_number}: duplicate country {country!r}")
            continue
        rows[country] = (score, rank)
        source_rows[country] = row_number

    if errors:
        raise IndexCsvError(f"{spec.name}: {len(errors)} invalid rows", errors)

    logger.info(f"Index {spec.name}: {len(rows)} countries ingested")
    return IndexTable(spec.name, spec.direction, dict(sorted(rows.items())))


def load_index_table(spec: IndexSpec) -> IndexTable:
    if not spec.path:
        raise IndexCsvError(f"{spec.name}: no CSV path configured")
    text = Path(spec.path).read_text(encoding="utf-8-sig")
    return parse_index_csv(text, spec)


# ---------------------
# Join
# ---------------------
@dataclass
class JoinedDataset:
    mode: str
    countries: List[str]
    features: pd.DataFrame                  # indexed by country, FEATURE_COLUMNS
    index_scores: Dict[str, pd.Series]      # per index, complete over its joined countries
    directions: Dict[str, str]
    provenance: Dict[str, dict]

    @property
    def index_names(self) -> List[str]:
        return list(self.index_scores)

    def view(self, index_name: str) -> Tuple[pd.DataFrame, pd.Series]:
        """Feature rows and scores of the countries joined for one index."""
        scores = self.index_scores[index_name]
        return self.features.loc[scores.index], scores

    def scores_frame(self) -> pd.DataFrame:
        return pd.concat(self.index_scores.values(), axis=1, join="inner" if self.mode == GLOBAL_INTERSECTION else "outer")


def join_corpus_indices(features: pd.DataFrame, indices: Sequence[IndexTable],
                        mode: str = GLOBAL_INTERSECTION) -> JoinedDataset:
    """Inner-join the feature store with each index on canonical country names.

    Countries present in only one source are dropped and listed in the
    provenance record.
    """
    if mode not in JOIN_MODES:
        raise JoinError(f"unknown join mode {mode!r}")
    if features.empty:
        raise JoinError("feature store is empty")
    if not indices:
        raise JoinError("no index tables to join")
    if features["country"].duplicated().any():
        raise JoinError("feature store has duplicate countries")
    names = [t.index_name for t in indices]
    if len(set(names)) != len(names):
        raise JoinError(f"duplicate index names: {names}")

    logger.info("Joining on the intersection of country names; countries unique to one source are dropped")
    feature_countries = set(features["country"])
    provenance: Dict[str, dict] = {}
    per_index: Dict[str, List[str]] = {}
    for table in indices:
        index_countries = set(table.rows)
        shared = sorted(feature_countries & index_countries)
        if not shared:
            raise JoinError(f"no countries shared between the feature store and index {table.index_name!r}")
        per_index[table.index_name] = shared
        provenance[table.index_name] = {
            "joined": len(shared),
            "dropped_from_features": sorted(feature_countries - index_countries),
            "dropped_from_index": sorted(index_countries - feature_countries),
        }
        logger.info(f"Index {table.index_name}: joined {len(shared)}, "
                    f"dropped {len(feature_countries - index_countries)} anthems and "
                    f"{len(index_countries - feature_countries)} index rows")

    if mode == GLOBAL_INTERSECTION:
        common = sorted(set.intersection(*(set(c) for c in per_index.values())))
        if not common:
            raise JoinError("empty intersection across the feature store and all indices")
        per_index = {name: common for name in per_index}
        countries = common
        provenance["global"] = {
            "joined": len(common),
            "dropped_from_features": sorted(feature_countries - set(common)),
        }
    else:
        countries = sorted(set().union(*per_index.values()))

    scores = {t.index_name: t.scores().loc[per_index[t.index_name]] for t in indices}
    table = features.set_index("country").loc[countries, list(FEATURE_COLUMNS)]
    return JoinedDataset(
        mode=mode,
        countries=countries,
        features=table,
        index_scores=scores,
        directions={t.index_name: t.direction for t in indices},
        provenance=provenance,
    )
