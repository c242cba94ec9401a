import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resbemf import (
    ParseError,
    RatingFormat,
    RatingsDataset,
    ScoreSet,
    make_folds,
    parse_ratings,
    split,
    stats,
    write_partition_csv,
    write_ratings,
)
from conftest import SCORES_1_5, make_dataset, random_dataset


def parse_text(text, **kwargs):
    return parse_ratings(io.StringIO(text), **kwargs)


# -- parsing -------------------------------------------------------------------


def test_parse_basic_tab_file():
    ds = parse_text("1\t10\t4\n2\t10\t3\n1\t11\t5\n")
    assert ds.n_users == 2 and ds.n_items == 2 and ds.n_ratings == 3
    assert ds.user_ids == ("1", "2") and ds.item_ids == ("10", "11")
    assert ds.score_set.values == (3.0, 4.0, 5.0)
    assert ds.n_test_ratings == 0


def test_parse_duplicate_pair_last_wins():
    ds = parse_text("1\t10\t4\n1\t11\t2\n1\t10\t5\n")
    assert ds.n_ratings == 2
    assert ds.n_duplicates == 1
    row = list(ds.triples(np.arange(ds.n_ratings)))
    assert ("1", "10", 5.0) in row


def test_parse_empty_stream_errors():
    with pytest.raises(ParseError, match="no ratings"):
        parse_text("")
    with pytest.raises(ParseError, match="no ratings"):
        parse_text("\n   \n")


def test_parse_malformed_line_reports_number():
    with pytest.raises(ParseError, match="line 2"):
        parse_text("1\t10\t4\n1\t11\n")
    with pytest.raises(ParseError, match="line 3"):
        parse_text("1\t10\t4\n1\t11\t2\n1\t12\tbad\n")


def test_parse_column_order_and_header():
    text = "item,user,rating\n10,1,4\n11,2,2\n"
    fmt = RatingFormat(delimiter=",", columns=("item", "user", "rating"), header=True)
    ds = parse_ratings(io.StringIO(text), fmt)
    assert ds.user_ids == ("1", "2") and ds.item_ids == ("10", "11")


def test_parse_whitespace_delimiter_and_extra_fields():
    fmt = RatingFormat(delimiter=None)
    ds = parse_text("1 10 4 881250949\n2 11 3 881250950\n", fmt=fmt)
    assert ds.n_ratings == 2


def test_parse_bytes_stream():
    ds = parse_ratings(io.BytesIO(b"1\t10\t4\n2\t11\t3\n"))
    assert ds.n_ratings == 2


def test_parse_explicit_score_set_enforced():
    half_stars = ScoreSet(tuple(np.arange(0.5, 4.5, 0.5)))
    ds = parse_text("1\t10\t0.5\n2\t10\t4.0\n", score_set=half_stars)
    assert ds.score_set is half_stars
    with pytest.raises(ParseError, match="line 1"):
        parse_text("1\t10\t4.5\n", score_set=half_stars)


def test_parse_single_valued_file_cannot_infer_scores():
    with pytest.raises(ValueError, match="two distinct"):
        parse_text("1\t10\t4\n2\t11\t4\n")


def test_format_rejects_bad_columns():
    with pytest.raises(ValueError):
        RatingFormat(columns=("user", "item", "time"))


triple_sets = st.sets(
    st.tuples(st.integers(0, 8), st.integers(0, 8), st.sampled_from([1.0, 2.5, 3.0, 4.5])),
    min_size=2,
    max_size=30,
).filter(lambda s: len({(u, i) for u, i, _ in s}) == len(s) and len({r for _, _, r in s}) >= 2)


@given(triple_sets)
@settings(max_examples=50, deadline=None)
def test_parse_serialize_round_trip(triples):
    ds = make_dataset([(f"u{u}", f"i{i}", r) for u, i, r in triples])
    buf = io.StringIO()
    write_ratings(ds, buf)
    again = parse_text(buf.getvalue())
    assert set(ds.triples(np.arange(ds.n_ratings))) == set(again.triples(np.arange(again.n_ratings)))


# -- dataset invariants -----------------------------------------------------------


def test_dataset_rejects_duplicates_and_bad_indices():
    with pytest.raises(ValueError, match="duplicate"):
        RatingsDataset(
            user_ids=("a",),
            item_ids=("x",),
            users=np.array([0, 0]),
            items=np.array([0, 0]),
            values=np.array([1.0, 2.0]),
            is_test=np.zeros(2, bool),
            score_set=ScoreSet((1.0, 2.0)),
        )
    with pytest.raises(ValueError, match="out of bounds"):
        RatingsDataset(
            user_ids=("a",),
            item_ids=("x",),
            users=np.array([1]),
            items=np.array([0]),
            values=np.array([1.0]),
            is_test=np.zeros(1, bool),
            score_set=ScoreSet((1.0, 2.0)),
        )


def test_dataset_arrays_read_only(tiny_dense_dataset):
    with pytest.raises(ValueError):
        tiny_dense_dataset.values[0] = 9.0


# -- split --------------------------------------------------------------------


def test_split_exact_count():
    rng = np.random.default_rng(0)
    ds = random_dataset(rng, n_users=10, n_items=10)
    assert ds.n_ratings == 100
    tagged = split(ds, 0.2, seed=4)
    assert tagged.n_test_ratings == 20
    assert tagged.n_ratings == 100


def test_split_deterministic_and_seed_sensitive():
    ds = random_dataset(np.random.default_rng(1), n_users=8, n_items=8)
    a = split(ds, 0.3, seed=7)
    b = split(ds, 0.3, seed=7)
    c = split(ds, 0.3, seed=8)
    assert np.array_equal(a.is_test, b.is_test)
    assert not np.array_equal(a.is_test, c.is_test)


def test_split_rejects_bad_fraction(tiny_dense_dataset):
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            split(tiny_dense_dataset, bad, seed=0)


@given(st.integers(0, 2**31 - 1), st.floats(0.05, 0.95))
@settings(max_examples=30, deadline=None)
def test_split_partitions_cover_everything(seed, fraction):
    ds = random_dataset(np.random.default_rng(3), n_users=6, n_items=6)
    tagged = split(ds, fraction, seed=seed)
    train, test = set(tagged.train_rows().tolist()), set(tagged.test_rows().tolist())
    assert train | test == set(range(ds.n_ratings))
    assert train & test == set()
    assert len(test) == round(fraction * ds.n_ratings)


def test_split_reproduces_table_sized_test_set():
    # fraction chosen as test/total must reproduce the test count exactly
    ds = random_dataset(np.random.default_rng(5), n_users=20, n_items=25)
    n = ds.n_ratings
    n_test = 37
    tagged = split(ds, n_test / n, seed=1)
    assert tagged.n_test_ratings == n_test


# -- folds --------------------------------------------------------------------


def test_folds_balanced_sizes():
    ds = random_dataset(np.random.default_rng(2), n_users=2, n_items=5)  # 10 ratings
    folds = make_folds(ds, 5, seed=0)
    sizes = sorted(len(folds.rows_in(j)) for j in range(5))
    assert sizes == [2, 2, 2, 2, 2]


def test_folds_sizes_differ_by_at_most_one():
    ds = make_dataset([(f"u{j}", "i0", float(1 + j % 3)) for j in range(11)])
    folds = make_folds(ds, 5, seed=3)
    sizes = sorted(len(folds.rows_in(j)) for j in range(5))
    assert sizes == [2, 2, 2, 2, 3]


def test_folds_deterministic():
    ds = random_dataset(np.random.default_rng(4), n_users=5, n_items=5)
    a = make_folds(ds, 4, seed=11)
    b = make_folds(ds, 4, seed=11)
    assert np.array_equal(a.fold_of, b.fold_of)


def test_folds_partition_the_train_set():
    ds = split(random_dataset(np.random.default_rng(6), n_users=7, n_items=7), 0.25, seed=0)
    folds = make_folds(ds, 5, seed=2)
    union = np.concatenate([folds.rows_in(j) for j in range(5)])
    assert sorted(union.tolist()) == sorted(ds.train_rows().tolist())
    for j in range(5):
        inner = set(folds.rows_in(j).tolist())
        outer = set(folds.rows_out(j).tolist())
        assert inner.isdisjoint(outer)
        assert inner | outer == set(ds.train_rows().tolist())
    assert np.all(folds.fold_of[ds.test_rows()] == -1)


def test_folds_reject_small_train():
    ds = make_dataset([("a", "x", 1.0), ("b", "y", 2.0), ("c", "z", 3.0)])
    with pytest.raises(ValueError):
        make_folds(ds, 5, seed=0)
    with pytest.raises(ValueError):
        make_folds(ds, 1, seed=0)


# -- stats ----------------------------------------------------------------------


def test_stats_counts(tiny_dense_dataset):
    tagged = split(tiny_dense_dataset, 0.25, seed=0)
    report = stats(tagged)
    assert report.n_users == 4 and report.n_items == 4
    assert report.n_ratings == 16
    assert report.n_test_ratings == 4
    assert report.score_range == (1.0, 5.0)


def test_stats_empty_dataset_all_zero():
    empty = RatingsDataset(
        user_ids=(),
        item_ids=(),
        users=np.array([], dtype=int),
        items=np.array([], dtype=int),
        values=np.array([]),
        is_test=np.array([], dtype=bool),
        score_set=SCORES_1_5,
    )
    report = stats(empty)
    assert (report.n_users, report.n_items, report.n_ratings, report.n_test_ratings) == (0, 0, 0, 0)


# -- partition export --------------------------------------------------------------


def test_partition_csv_layout(tmp_path):
    ds = split(random_dataset(np.random.default_rng(8), n_users=4, n_items=4), 0.25, seed=1)
    folds = make_folds(ds, 3, seed=1)
    out = tmp_path / "partition.csv"
    write_partition_csv(ds, out, folds=folds)
    lines = out.read_text().splitlines()
    assert lines[0] == "user,item,rating,tag,fold"
    assert len(lines) == ds.n_ratings + 1
    tags = [line.split(",")[3] for line in lines[1:]]
    assert tags.count("test") == ds.n_test_ratings
    for line in lines[1:]:
        tag, fold = line.split(",")[3:5]
        assert (tag == "test") == (fold == "")
