import math

import pytest

from locco.logical_forms import Triple, TripleSet, parse_paren_sexpr
from locco.prior import EmptyTableQuery, NonPositiveSmoothing, PriorError, PriorTable, init_prior, observe


def ts(*names):
    return TripleSet([Triple(n, "r", "o") for n in names])


def key(name):
    return f"(<S> {name} <R> r <O> o)"


def test_tau_entry():
    table = observe(init_prior(1.0), ts("a"))
    assert table.count(key("a")) == 2.0


@pytest.mark.parametrize("tau", [0.0, -1.0, float("nan")])
def test_non_positive_smoothing(tau):
    with pytest.raises(NonPositiveSmoothing):
        init_prior(tau)


def test_hand_counts():
    table = init_prior(1.0).observe(ts("a", "b")).observe(ts("a"))
    assert (table.count(key("a")), table.count(key("b")), table.total) == (3.0, 2.0, 5.0)


def test_empty_form_leaves_table_unchanged():
    table = init_prior(1.0).observe(ts("a"))
    before = table.snapshot()
    table.observe(TripleSet())
    assert table == before


def test_logprob_cases():
    table = init_prior(1.0).observe(ts("a", "b")).observe(ts("a"))
    assert table.logprob(ts("a")) == pytest.approx(math.log(0.6), abs=1e-12)
    assert table.logprob(TripleSet()) == 0.0
    assert table.logprob(ts("a", "zz")) == pytest.approx(math.log(0.6) + math.log(1 / 6), abs=1e-12)


def test_empty_table_query():
    with pytest.raises(EmptyTableQuery):
        init_prior(1.0).logprob(ts("a"))
    assert init_prior(1.0).logprob(TripleSet()) == 0.0


def test_snapshot_is_a_value_copy():
    table = init_prior(1.0).observe(ts("a"))
    snap = table.snapshot()
    table.observe(ts("b"))
    assert snap.total == 2.0 and table.total == 4.0
    assert table.snapshot() == table.snapshot()
    assert init_prior(1.0).snapshot() == init_prior(1.0)


def test_sexpr_multiset_counting():
    table = init_prior(1.0).observe(parse_paren_sexpr("(and (f $0) (f $0))"))
    assert table.count("(f $0)") == 3.0


def test_merge_matches_joint_observation():
    a = init_prior(1.0).observe(ts("a")).observe(ts("b"))
    b = init_prior(1.0).observe(ts("a", "c"))
    joint = init_prior(1.0).observe(ts("a")).observe(ts("b")).observe(ts("a", "c"))
    assert a.merge(b) == joint == b.merge(a)
    with pytest.raises(PriorError):
        a.merge(init_prior(2.0))


def test_save_load_bit_exact(tmp_path):
    table = init_prior(0.3).observe(ts("a", "b")).observe(parse_paren_sexpr("(f (g x))"))
    table.iteration = 2
    table.save(tmp_path / "p.tsv")
    again = PriorTable.load(tmp_path / "p.tsv")
    assert again == table
    lines = (tmp_path / "p.tsv").read_text().splitlines()
    assert lines[1:] == sorted(lines[1:])


def test_load_rejects_bad_header(tmp_path):
    (tmp_path / "p.tsv").write_text("nope\n")
    with pytest.raises(PriorError):
        PriorTable.load(tmp_path / "p.tsv")
