import math
from datetime import date

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from procuraudit.errors import AlignmentError, DegenerateInput
from procuraudit.features import (
    NUMERIC_COLUMNS,
    OTHER,
    ContractFeatures,
    FeatureMatrix,
    assemble_matrix,
    contract_features,
    derive_date_flag,
    derive_overdraw,
    log_transform,
    one_hot,
    pearson,
)
from procuraudit.ingest import RawContract
from procuraudit.text import SparseCounts, Vocabulary


class TestLogTransform:
    def test_zero(self):
        assert log_transform(0) == 0.0

    def test_e_minus_one(self):
        assert log_transform(math.e - 1) == pytest.approx(1.0, abs=1e-15)

    def test_million(self):
        # ln(1000001) from a 40-digit mpmath evaluation
        assert log_transform(1_000_000) == pytest.approx(13.815511557963774, abs=1e-12)

    def test_null(self):
        assert log_transform(None) is None

    def test_negative(self):
        with pytest.raises(ValueError):
            log_transform(-1)


class TestOverdraw:
    def test_equal(self):
        assert derive_overdraw(100, 100) == (0.0, 0)

    def test_overdrawn(self):
        diff, flag = derive_overdraw(100, 250)
        # ln(251) - ln(101) from a 40-digit mpmath evaluation
        assert diff == pytest.approx(0.9103324222905244, abs=1e-12)
        assert flag == 1

    def test_null(self):
        assert derive_overdraw(None, 250) == (None, None)
        assert derive_overdraw(100, None) == (None, None)


@given(st.floats(0, 1e12), st.floats(0, 1e12))
def test_overdraw_flag_matches_sign(c, v):
    diff, flag = derive_overdraw(c, v)
    assert flag == int(diff > 0)


class TestDateFlag:
    def test_inverted(self):
        assert derive_date_flag(date(2010, 5, 1), date(2010, 4, 1)) == 1

    def test_same_day(self):
        assert derive_date_flag(date(2010, 4, 1), date(2010, 4, 1)) == 0

    def test_null(self):
        assert derive_date_flag(None, date(2010, 4, 1)) is None


def naive_pearson(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    den = math.sqrt(sum((x - mx) ** 2 for x in xs) * sum((y - my) ** 2 for y in ys))
    return num / den


class TestPearson:
    def test_linear(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-15)

    def test_anti(self):
        assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-15)

    def test_hand_value(self):
        assert naive_pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)
        assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-15)

    def test_zero_variance(self):
        with pytest.raises(DegenerateInput):
            pearson([1, 1, 1], [1, 2, 3])

    def test_too_short(self):
        with pytest.raises(DegenerateInput):
            pearson([1], [2])


finite = st.floats(-1e3, 1e3, allow_nan=False)
vectors = st.lists(finite, min_size=3, max_size=20)


@given(vectors, st.floats(0.1, 10), finite)
def test_pearson_affine(xs, a, b):
    assume(np.ptp(xs) > 1e-3)
    ys = [a * x + b for x in xs]
    assert pearson(xs, ys) == pytest.approx(1.0, abs=1e-12)
    assert pearson(xs, [-y for y in ys]) == pytest.approx(-1.0, abs=1e-12)


@given(st.lists(st.tuples(finite, finite), min_size=3, max_size=20), st.floats(0.1, 10), finite)
def test_pearson_symmetric_and_rescaling_invariant(pairs, a, b):
    xs, ys = map(list, zip(*pairs))
    assume(np.ptp(xs) > 1e-2 and np.ptp(ys) > 1e-2)
    r = pearson(xs, ys)
    assert pearson(ys, xs) == pytest.approx(r, abs=1e-12)
    assert pearson([a * x + b for x in xs], ys) == pytest.approx(r, abs=1e-12)
    assert r == pytest.approx(naive_pearson(xs, ys), abs=1e-9)


class TestOneHot:
    def test_basic(self):
        cols, m = one_hot(["Obra", "Obra", "Suministro"], min_count=1)
        assert cols == ["Obra", "Suministro", OTHER]
        assert m.tolist() == [[1, 0, 0], [1, 0, 0], [0, 1, 0]]

    def test_all_null(self):
        cols, m = one_hot([None, None], min_count=1)
        assert cols == [OTHER]
        assert m.tolist() == [[1], [1]]

    def test_cutoff(self):
        cols, m = one_hot(["A", "A", "B"], min_count=2)
        assert cols == ["A", OTHER]
        assert m[2].tolist() == [0, 1]

    def test_bad_min_count(self):
        with pytest.raises(ValueError):
            one_hot(["A"], min_count=0)


@given(st.lists(st.one_of(st.none(), st.sampled_from("abcde")), max_size=30), st.integers(1, 4))
def test_one_hot_rows_sum_to_one(values, k):
    _, m = one_hot(values, k)
    assert (m.sum(axis=1) == 1).all()


def feats(i, log_c=1.0, **kw):
    base = dict(
        contract_key=(f"C{i}", i),
        log_cuantia=log_c,
        log_valor_definitivo=1.0,
        log_valor_contrato=1.0,
        log_valor_adiciones=0.0,
        log_valor_total=1.0,
        amount_diff=0.0,
        overdraw_flag=0,
        date_inconsistency_flag=0,
    )
    base.update(kw)
    return ContractFeatures(**base)


class TestAssembleMatrix:
    def test_shape_numeric_flags_onehot(self):
        fs = [feats(i) for i in range(5)]
        cols, m = one_hot(["a", "a", "b", "b", "c"], min_count=1)
        fm = assemble_matrix(fs, {"TIPO": (cols, m)})
        assert fm.shape == (5, len(NUMERIC_COLUMNS) + 2 + 4)
        assert fm.column_names[-4:] == ["cat:TIPO=a", "cat:TIPO=b", "cat:TIPO=c", f"cat:TIPO={OTHER}"]

    def test_median_impute_with_indicator(self):
        fs = [feats(0, 1.0), feats(1, None), feats(2, 3.0)]
        fm = assemble_matrix(fs)
        assert fm.column("num:log_cuantia").tolist() == [1.0, 2.0, 3.0]
        assert fm.column("flag:missing_log_cuantia").tolist() == [0.0, 1.0, 0.0]
        assert fm.shape[1] == len(NUMERIC_COLUMNS) + 2 + 1

    def test_all_null_column_zero(self):
        fs = [feats(i, None) for i in range(3)]
        fm = assemble_matrix(fs)
        assert fm.column("num:log_cuantia").tolist() == [0.0, 0.0, 0.0]

    def test_text_block_adds_vocab_width(self):
        fs = [feats(i) for i in range(3)]
        vocab = Vocabulary(["civil", "obra"], {"civil": 1, "obra": 2}, 3)
        counts = SparseCounts(3, 2, [[(1, 2)], [(0, 1), (1, 1)], []])
        without = assemble_matrix(fs)
        with_text = assemble_matrix(fs, text=(vocab, counts))
        assert with_text.shape[1] - without.shape[1] == len(vocab)
        assert with_text.column("tok:obra").tolist() == [2.0, 1.0, 0.0]

    def test_block_prefixes_unique(self):
        fs = [feats(i) for i in range(3)]
        fm = assemble_matrix(fs, {"T": one_hot(["x", "y", None], 1)})
        assert len(set(fm.column_names)) == len(fm.column_names)
        assert all(c.split(":")[0] in {"num", "flag", "cat", "tok"} for c in fm.column_names)

    def test_misaligned_blocks(self):
        fs = [feats(i) for i in range(3)]
        with pytest.raises(AlignmentError):
            assemble_matrix(fs, {"T": one_hot(["x", "y"], 1)})

    def test_csv_roundtrip(self, tmp_path):
        fs = [feats(0, 1.0), feats(1, None), feats(2, 1 / 3)]
        fm = assemble_matrix(fs)
        fm.to_csv(tmp_path / "features.csv")
        back = FeatureMatrix.from_csv(tmp_path / "features.csv")
        assert back.column_names == fm.column_names
        assert back.row_keys == fm.row_keys
        np.testing.assert_array_equal(back.rows, fm.rows)


optional = st.one_of(st.none(), st.floats(0, 30))


@given(st.lists(st.tuples(optional, optional, st.one_of(st.none(), st.sampled_from([0, 1]))), min_size=1, max_size=15))
def test_assembled_matrix_never_has_nan(rows):
    fs = [feats(i, a, amount_diff=b, overdraw_flag=f) for i, (a, b, f) in enumerate(rows)]
    fm = assemble_matrix(fs)
    assert np.isfinite(fm.rows).all()


def test_contract_features_from_record():
    r = RawContract(
        row_index=7,
        id_objeto_contrato="C9",
        cuantia=100.0,
        valor_definitivo=250.0,
        fechacreacion=date(2010, 5, 1),
        fechaestadoadjudicado=date(2010, 4, 1),
    )
    cf = contract_features(r)
    assert cf.contract_key == ("C9", 7)
    assert cf.overdraw_flag == 1 and cf.date_inconsistency_flag == 1
    assert cf.log_valor_total is None
    assert cf.missing_flags["log_valor_total"] == 1 and cf.missing_flags["log_cuantia"] == 0
