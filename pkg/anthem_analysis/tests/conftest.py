import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from anthem_analysis.score_model import build_performance
from anthem_analysis.synthetic import anthem_a, write_demo_corpus

from .helpers import MINIMAL_SMF

settings.register_profile("anthem", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("anthem")

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture
def minimal_smf():
    return MINIMAL_SMF


@pytest.fixture
def anthem_a_perf():
    return build_performance(anthem_a().to_smf())


@pytest.fixture
def golden_anthem_a():
    return json.loads((GOLDEN_DIR / "anthem_A_features.json").read_text(encoding="utf-8"))


@pytest.fixture
def demo_corpus(tmp_path):
    return write_demo_corpus(str(tmp_path / "demo"), seed=7)
