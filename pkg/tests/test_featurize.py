import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provfaas.featurize import (
    CostModel,
    EmbedWorkItem,
    TrigramHashEmbedder,
    embed_attr,
    fnv1a_64,
    load_embeddings,
    pack_embedding_units,
    run_embedding_stage,
    save_embeddings,
    trigrams,
)

costs = st.lists(st.floats(0.01, 30, allow_nan=False), max_size=40)


def items_of(cs):
    return [EmbedWorkItem(i, "", c) for i, c in enumerate(cs)]


def test_fnv1a_known_vectors():
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_trigrams_short_strings_used_whole():
    assert trigrams("") == []
    assert trigrams("ab") == ["ab"]
    assert trigrams("abcd") == ["abc", "bcd"]


def test_empty_attr_is_zero_vector():
    v = embed_attr("", 64)
    assert v.shape == (64,) and v.dtype == np.float32 and not v.any()


@given(st.text(max_size=80), st.integers(1, 128))
def test_norm_is_zero_or_one(attr, d):
    n = float(np.linalg.norm(embed_attr(attr, d)))
    assert abs(n) < 1e-6 or abs(n - 1) < 1e-6


def test_same_attr_twice_is_bitwise_identical():
    a = embed_attr("/usr/bin/ssh")
    b = embed_attr("/usr/bin/ssh")
    assert a.tobytes() == b.tobytes()
    a[0] = 99  # callers get their own copy
    assert embed_attr("/usr/bin/ssh")[0] != 99


def test_bad_dimension():
    with pytest.raises(ValueError):
        embed_attr("x", 0)


def test_ten_unit_items_fill_one_unit():
    units = pack_embedding_units(items_of([1.0] * 10), 10)
    assert len(units) == 1 and units[0].total_cost == 10 and not units[0].oversize


def test_ffd_hand_trace():
    units = pack_embedding_units(items_of([7, 5, 4, 3, 1]), 8)
    assert [sorted(it.est_cost for it in u.items) for u in units] == [[1, 7], [3, 5], [4]]


def test_oversize_item_gets_solo_unit():
    units = pack_embedding_units(items_of([20]), 8)
    assert len(units) == 1
    assert units[0].oversize and units[0].vertical_scale == 3


def test_budget_must_be_positive():
    with pytest.raises(ValueError):
        pack_embedding_units(items_of([1]), 0)


@settings(max_examples=200)
@given(costs, st.floats(0.5, 25))
def test_partition_property_and_unit_bounds(cs, budget):
    units = pack_embedding_units(items_of(cs), budget)
    placed = sorted(it.node for u in units for it in u.items)
    assert placed == list(range(len(cs)))
    for u in units:
        if not u.oversize:
            assert u.total_cost <= budget + 1e-9
    assert len(units) <= len(cs)
    if cs:
        floor = math.ceil(sum(cs) / budget - 1e-9)
        # an oversize unit stands in for vertical_scale budget-sized units
        assert sum(u.vertical_scale for u in units) >= floor
        if not any(u.oversize for u in units):
            assert len(units) >= floor


def test_zero_nodes():
    res = run_embedding_stage({}, 10)
    assert res.vectors == {} and res.units == []


def _attrs(n, seed=0):
    rnd = random.Random(seed)
    alphabet = "abcdefghijklmnopqrstuvwxyz/._-"
    return {i: "".join(rnd.choice(alphabet) for _ in range(rnd.randrange(0, 90))) for i in range(n)}


def test_ten_units_match_single_unit_run():
    attrs = _attrs(1000)
    total = sum(CostModel()(len(a)) for a in attrs.values())
    many = run_embedding_stage(attrs, unit_budget=total / 10)
    one = run_embedding_stage(attrs, unit_budget=total + 1)
    assert 10 <= len(many.units) <= 12 and len(one.units) == 1
    assert all(many.vectors[i].tobytes() == one.vectors[i].tobytes() for i in attrs)


def test_identical_attrs_identical_vectors():
    res = run_embedding_stage({i: "/bin/bash --login" for i in range(20)}, 5)
    first = res.vectors[0].tobytes()
    assert all(v.tobytes() == first for v in res.vectors.values())


@settings(max_examples=30, deadline=None)
@given(st.permutations(list(range(60))), st.floats(1.2, 20))
def test_vectors_invariant_under_permutation_and_budget(perm, budget):
    attrs = _attrs(60, seed=4)
    base = run_embedding_stage(attrs, unit_budget=1e9)
    got = run_embedding_stage([(i, attrs[i]) for i in perm], unit_budget=budget)
    assert list(got.vectors) == list(base.vectors)
    assert all(got.vectors[i].tobytes() == base.vectors[i].tobytes() for i in attrs)


def test_matrix_rows_follow_ids():
    res = run_embedding_stage({3: "abc", 1: "xyz"}, 10, d=8)
    m = res.matrix([1, 3], 8)
    assert np.array_equal(m[0], embed_attr("xyz", 8)) and np.array_equal(m[1], embed_attr("abc", 8))


def test_transformer_matches_function():
    X = ["/etc/passwd", "", "ab"]
    out = TrigramHashEmbedder(n_features=16).fit_transform(X)
    assert out.shape == (3, 16)
    assert np.array_equal(out[0], embed_attr("/etc/passwd", 16))
    with pytest.raises(ValueError):
        TrigramHashEmbedder(n_features=16).transform("single string")


# -- PFEMB dump ---------------------------------------------------------------

def test_embedding_dump_round_trip(tmp_path):
    vecs = run_embedding_stage(_attrs(50, 2), 7, d=12).vectors
    p = tmp_path / "emb.bin"
    save_embeddings(p, vecs)
    raw = p.read_bytes()
    assert raw[:6] == b"PFEMB\0" and len(raw) == 16 + 50 * (8 + 4 * 12)
    back = load_embeddings(p)
    assert list(back) == list(vecs)
    assert all(back[i].tobytes() == vecs[i].tobytes() for i in vecs)


def test_truncated_embedding_dump(tmp_path):
    p = tmp_path / "emb.bin"
    save_embeddings(p, {0: np.ones(4, np.float32), 1: np.zeros(4, np.float32)})
    p.write_bytes(p.read_bytes()[:-3])
    with pytest.raises(ValueError, match="records"):
        load_embeddings(p)
    p.write_bytes(b"PFEMB")
    with pytest.raises(ValueError, match="truncated"):
        load_embeddings(p)
