import io
import math

import numpy as np
import pytest

from procuraudit.features import pearson
from procuraudit.ingest import deduplicate, parse_csv
from procuraudit.synth import CONTRACT_TYPES, MODALITIES, SynthConfig, generate, log_amount_correlation, planted_gaussian


def parse(text):
    return parse_csv(io.BytesIO(text.encode("utf-8")))


def test_correlation_example():
    text, _ = generate(SynthConfig(n_contracts=1000, anomaly_rate=0, seed=7))
    assert 0.90 <= log_amount_correlation(text) <= 0.99


def test_duplicates_match_ground_truth():
    text, truth = generate(SynthConfig(n_contracts=100, duplicate_rate=0.1, seed=3))
    recs, diags = parse(text)
    assert diags == []
    _, removed = deduplicate(recs)
    assert removed == sum(t["kind"] == "duplicate" for t in truth) == 10


def test_duplicates_follow_their_original():
    text, truth = generate(SynthConfig(n_contracts=50, duplicate_rate=0.3, seed=1))
    recs, _ = parse(text)
    kind = {t["row"]: t["kind"] for t in truth}
    first_seen = {}
    for r in recs:
        if r.key not in first_seen:
            first_seen[r.key] = r.row_index
            assert kind[r.row_index] != "duplicate"


def test_byte_identical():
    cfg = SynthConfig(n_contracts=200, duplicate_rate=0.05, date_inversion_rate=0.05, seed=11)
    assert generate(cfg) == generate(cfg)


def test_ground_truth_rows_align_with_parser():
    text, truth = generate(SynthConfig(n_contracts=120, duplicate_rate=0.1, date_inversion_rate=0.1, seed=2))
    recs, _ = parse(text)
    assert [t["row"] for t in truth] == [r.row_index for r in recs]
    kind = {t["row"]: t["kind"] for t in truth}
    for r in recs:
        if kind[r.row_index] == "date_inverted":
            assert r.fechacreacion > r.fechaestadoadjudicado
        elif kind[r.row_index] == "normal":
            assert r.fechacreacion <= r.fechaestadoadjudicado


def test_anomalies_overdraw_more():
    text, truth = generate(SynthConfig(n_contracts=1000, anomaly_rate=0.05, seed=4))
    recs, _ = parse(text)
    kind = {t["row"]: t["kind"] for t in truth}
    over = {"normal": [], "planted_anomaly": []}
    for r in recs:
        over[kind[r.row_index]].append(r.valor_definitivo - r.cuantia)
    assert len(over["planted_anomaly"]) == 50
    assert np.mean(over["planted_anomaly"]) > np.mean(over["normal"])


def test_categories_from_reference_tables():
    text, _ = generate(SynthConfig(n_contracts=300, seed=0))
    recs, _ = parse(text)
    assert {r.tipo_contrato for r in recs} <= set(CONTRACT_TYPES)
    assert {r.tipo_modalidad for r in recs} <= set(MODALITIES)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(n_contracts=5)
    with pytest.raises(ValueError):
        SynthConfig(anomaly_rate=0.3)
    with pytest.raises(ValueError):
        SynthConfig(duplicate_rate=1.5)


def test_planted_gaussian():
    X, rows = planted_gaussian(200, 4, 3, 8.0, seed=1)
    assert X.shape == (200, 4) and len(rows) == 3
    np.testing.assert_allclose(np.linalg.norm(X[rows], axis=1), 8.0)


def test_log_correlation_helper_agrees_with_direct_computation():
    text, _ = generate(SynthConfig(n_contracts=50, seed=9))
    recs, _ = parse(text)
    xs = [math.log1p(r.cuantia) for r in recs]
    ys = [math.log1p(r.valor_definitivo) for r in recs]
    assert log_amount_correlation(text) == pearson(xs, ys)
