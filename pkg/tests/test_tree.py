"""Hierarchy parsing, encoding, decoding, and the dataset container."""

import json
from itertools import combinations

import numpy as np
import pytest

from hipan import (
    CodecParams,
    EncodedDataset,
    InvalidDigitError,
    InvalidPaddingError,
    PadicCode,
    Record,
    TreeParseError,
    branching_stats,
    code,
    dataset_from_json,
    dataset_to_json,
    decode_code,
    dump_tree,
    encode_leaf,
    encode_tree,
    gen_synthetic,
    lca_depth,
    loads_tree,
    make_codec,
    select_prime,
    tree_to_nested,
    ultrametric_distance,
)
from conftest import TOY_TEXT, digits_dataset, irregular_tree


def test_toy_structure(toy_tree):
    t = toy_tree
    # preorder with lexicographic children: root, animal, cat, dog, plant, fern
    assert t.names == ("root", "animal", "cat", "dog", "plant", "fern")
    assert t.parent == (-1, 0, 1, 1, 0, 4)
    assert t.children[0] == (1, 4)
    assert t.children[1] == (2, 3)
    assert t.children[4] == (5,)
    assert t.sibling_index == (0, 0, 0, 1, 1, 0)
    assert t.depth == (0, 1, 2, 2, 1, 2)
    assert t.leaves == (2, 3, 5)
    assert t.max_depth == 2
    assert t.b_max == 2
    assert t.n_nodes == 6
    assert t.n_leaves == 3
    assert t.root == 0
    assert t.is_leaf(2) and not t.is_leaf(1)
    assert t.leaf_names() == ["cat", "dog", "fern"]
    assert t.id_of("fern") == 5
    with pytest.raises(KeyError):
        t.id_of("wolf")


def test_parse_skips_blanks_and_comments():
    text = "# taxonomy\n\nroot\t-\n# edge\ncat\troot\n\n"
    t = loads_tree(text)
    assert t.names == ("root", "cat")


def test_parse_strips_padding_spaces():
    t = loads_tree("root\t-\n cat \t root \n")
    assert t.names == ("root", "cat")


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("root\n", "line 1"),
        ("root\t-\ncat\troot\textra\n", "line 2"),
        ("root\t-\ncat\troot\ncat\troot\n", "duplicate"),
        ("root\t-\nother\t-\n", "second root"),
        ("cat\tanimal\n", "no root"),
        ("root\t-\n\troot\n", "empty node name"),
        ("root\t-\ncat\tanimal\n", "never defined"),
        ("root\t-\na\tb\nb\ta\n", "unreachable"),
        ("root\t-\n", "only a root"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(TreeParseError, match=fragment):
        loads_tree(text)


def test_dump_round_trip(toy_tree):
    assert loads_tree(dump_tree(toy_tree)) == toy_tree
    for seed in range(5):
        t = irregular_tree(seed, 30)
        assert loads_tree(dump_tree(t)) == t


def test_gen_synthetic_complete():
    t = gen_synthetic("complete", 3, 2)
    assert t.n_leaves == 9
    assert t.b_max == 3
    assert t.max_depth == 2
    assert all(t.depth[leaf] == 2 for leaf in t.leaves)
    # chain degenerates to one leaf
    chain = gen_synthetic("complete", 1, 4)
    assert chain.n_leaves == 1
    assert chain.max_depth == 4


def test_gen_synthetic_random_determinism():
    a = gen_synthetic("random", 4, 3, seed=11)
    b = gen_synthetic("random", 4, 3, seed=11)
    c = gen_synthetic("random", 4, 3, seed=12)
    assert a == b
    assert a != c
    assert a.max_depth == 3
    assert 1 <= a.b_max <= 4


def test_gen_synthetic_validation():
    with pytest.raises(ValueError):
        gen_synthetic("complete", 0, 2)
    with pytest.raises(ValueError):
        gen_synthetic("complete", 2, 0)
    with pytest.raises(ValueError):
        gen_synthetic("balanced", 2, 2)


def test_select_prime(toy_tree):
    assert select_prime(toy_tree) == 3
    assert select_prime(gen_synthetic("complete", 1, 3)) == 2
    assert select_prime(gen_synthetic("complete", 6, 1)) == 7
    assert select_prime(gen_synthetic("complete", 7, 1)) == 11


def test_make_codec(toy_tree):
    codec = make_codec(toy_tree)
    assert (codec.p, codec.K) == (3, 2)
    assert make_codec(toy_tree, K=5).K == 5


def test_encode_leaf_toy(toy_tree):
    codec = make_codec(toy_tree)
    assert encode_leaf(toy_tree, "cat", codec).digits == (0, 0)
    assert encode_leaf(toy_tree, "dog", codec).digits == (0, 1)
    assert encode_leaf(toy_tree, "fern", codec).digits == (1, 0)
    # id form matches name form
    assert encode_leaf(toy_tree, 5, codec) == encode_leaf(toy_tree, "fern", codec)


def test_encode_leaf_errors(toy_tree):
    codec = make_codec(toy_tree)
    with pytest.raises(ValueError, match="not a leaf"):
        encode_leaf(toy_tree, "animal", codec)
    with pytest.raises(ValueError, match="too small"):
        encode_leaf(toy_tree, "cat", CodecParams(2, 2))
    with pytest.raises(ValueError, match="shorter"):
        encode_leaf(toy_tree, "cat", CodecParams(3, 1))


def test_encode_tree_toy(toy_tree, toy_dataset):
    ds = toy_dataset
    assert [r.leaf for r in ds.records] == ["cat", "dog", "fern"]
    assert [r.code.digits for r in ds.records] == [(0, 0), (0, 1), (1, 0)]
    assert [r.depth for r in ds.records] == [2, 2, 2]
    assert ds.codec == CodecParams(3, 2)
    assert ds.n_records == 3


def test_encode_tree_pads_shallow_leaves(padded_tree):
    ds = encode_tree(padded_tree)
    by_name = {r.leaf: r for r in ds.records}
    assert by_name["b"].code.digits == (1, 0)
    assert by_name["b"].depth == 1
    assert by_name["a1"].code.digits == (0, 0)
    assert by_name["a2"].code.digits == (0, 1)


def test_decode_paths_toy(toy_tree):
    codec = make_codec(toy_tree)
    assert decode_code(toy_tree, code([0, 0], 3)) == (0, 1, 2)
    assert decode_code(toy_tree, code([0, 1], 3)) == (0, 1, 3)
    assert decode_code(toy_tree, code([1, 0], 3)) == (0, 4, 5)
    # path is root-to-leaf with strictly increasing depth
    path = decode_code(toy_tree, encode_leaf(toy_tree, "dog", codec))
    assert [toy_tree.depth[n] for n in path] == [0, 1, 2]


def test_decode_padding_stops_at_shallow_leaf(padded_tree):
    path = decode_code(padded_tree, code([1, 0], 3))
    assert path[-1] == padded_tree.id_of("b")
    with pytest.raises(InvalidPaddingError):
        decode_code(padded_tree, code([1, 1], 3))


def test_decode_invalid_digit(toy_tree):
    with pytest.raises(InvalidDigitError):
        decode_code(toy_tree, code([2, 0], 3))
    with pytest.raises(InvalidDigitError):
        decode_code(toy_tree, code([1, 1], 3))


def test_decode_short_code_ends_at_internal(toy_tree):
    # a hand codec shorter than the hierarchy walks out of digits mid-tree
    with pytest.raises(InvalidDigitError, match="internal"):
        decode_code(toy_tree, PadicCode((0,), CodecParams(3, 1)))


def test_round_trip_random_trees():
    for seed in range(20):
        t = irregular_tree(seed, 40)
        ds = encode_tree(t)
        seen = set()
        for r in ds.records:
            path = decode_code(t, r.code)
            assert path[0] == t.root
            assert path[-1] == t.id_of(r.leaf)
            assert r.code.digits not in seen
            seen.add(r.code.digits)


def _oracle_lca_depth(tree, a, b):
    # independent of the library walk: compare root paths as lists
    def root_path(n):
        path = []
        while n != -1:
            path.append(n)
            n = tree.parent[n]
        return path[::-1]

    pa, pb = root_path(a), root_path(b)
    k = 0
    while k < min(len(pa), len(pb)) and pa[k] == pb[k]:
        k += 1
    return tree.depth[pa[k - 1]]


def test_isometry_against_path_oracle(toy_tree):
    trees = [toy_tree] + [irregular_tree(s, 35) for s in range(4)]
    for t in trees:
        ds = encode_tree(t)
        p = ds.codec.p
        for ra, rb in combinations(ds.records, 2):
            d = _oracle_lca_depth(t, t.id_of(ra.leaf), t.id_of(rb.leaf))
            assert ultrametric_distance(ra.code, rb.code) == float(p) ** -d


def test_lca_depth(toy_tree):
    assert lca_depth(toy_tree, "cat", "dog") == 1
    assert lca_depth(toy_tree, "cat", "fern") == 0
    assert lca_depth(toy_tree, "cat", "cat") == 2
    assert lca_depth(toy_tree, "animal", "cat") == 1
    assert lca_depth(toy_tree, 2, 3) == 1
    with pytest.raises(KeyError):
        lca_depth(toy_tree, "cat", "wolf")


def test_branching_stats(toy_tree):
    assert branching_stats(toy_tree) == {0: {2: 1}, 1: {2: 1, 1: 1}}


def test_dataset_validation():
    codec = CodecParams(3, 2)
    rec = Record("x", code([0, 1], 3), 2)
    EncodedDataset(codec, (rec,))
    with pytest.raises(ValueError, match="codec"):
        EncodedDataset(CodecParams(5, 2), (rec,))
    with pytest.raises(ValueError, match="depth"):
        EncodedDataset(codec, (Record("x", code([0, 1], 3), 0),))
    with pytest.raises(ValueError, match="depth"):
        EncodedDataset(codec, (Record("x", code([0, 1], 3), 3),))


def test_digits_matrix_and_pair_counts(toy_dataset):
    D = toy_dataset.digits_matrix()
    assert D.dtype == np.int64
    assert D.tolist() == [[0, 0], [0, 1], [1, 0]]
    assert toy_dataset.pair_counts() == {1: {(0, 0): 1, (0, 1): 1, (1, 0): 1}}


def test_dataset_json_round_trip(toy_dataset):
    text = dataset_to_json(toy_dataset)
    assert dataset_from_json(text) == toy_dataset
    payload = json.loads(text)
    assert payload["codec"] == {"p": 3, "K": 2}
    assert payload["records"][0] == {"code": "0-0", "depth": 2, "leaf": "cat"}


def test_dataset_json_errors():
    with pytest.raises(ValueError):
        dataset_from_json("not json")
    with pytest.raises(ValueError):
        dataset_from_json("{}")
    with pytest.raises(ValueError):
        dataset_from_json('{"codec": {"p": 3, "K": 2}, "records": [{"leaf": "x", "code": "9-9", "depth": 2}]}')


def test_tree_to_nested(toy_tree, toy_dataset):
    doc = tree_to_nested(toy_tree, toy_dataset)
    assert doc == {
        "name": "root",
        "children": [
            {
                "name": "animal",
                "children": [
                    {"name": "cat", "code": "0-0"},
                    {"name": "dog", "code": "0-1"},
                ],
            },
            {"name": "plant", "children": [{"name": "fern", "code": "1-0"}]},
        ],
    }
    # without a dataset the leaves carry no codes
    bare = tree_to_nested(toy_tree)
    assert "code" not in bare["children"][0]["children"][0]


def _flatten(doc, parent=None, lines=None):
    lines = [] if lines is None else lines
    lines.append(f"{doc['name']}\t{'-' if parent is None else parent}")
    for child in doc.get("children", []):
        _flatten(child, doc["name"], lines)
    return lines


def test_nested_export_reingests_to_same_codes():
    for seed in (0, 3):
        t = irregular_tree(seed, 25)
        ds = encode_tree(t)
        doc = tree_to_nested(t, ds)
        t2 = loads_tree("\n".join(_flatten(doc)) + "\n")
        ds2 = encode_tree(t2)
        assert {r.leaf: r.code.digits for r in ds2.records} == {
            r.leaf: r.code.digits for r in ds.records
        }


def test_complete_binary_codes_match_convention():
    t = gen_synthetic("complete", 2, 2)
    ds = encode_tree(t)
    # four leaves, codes come out in sorted-path order
    assert [r.code.digits for r in ds.records] == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_digits_dataset_helper():
    ds = digits_dataset([[0, 1], [2, 0]], p=3)
    assert ds.codec == CodecParams(3, 2)
    assert ds.digits_matrix().tolist() == [[0, 1], [2, 0]]


def test_toy_text_is_stable():
    # guards the fixture itself: downstream hand oracles depend on it
    assert loads_tree(TOY_TEXT).leaf_names() == ["cat", "dog", "fern"]
