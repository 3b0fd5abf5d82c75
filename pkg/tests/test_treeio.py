"""Tree I/O: parser behavior on good and hostile input, ultrametric
validation, height extraction, internal-length agreement with the
branch-order formula, and canonical serialization round trips."""

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from bdgrowth import coalescent as co
from bdgrowth import treeio
from bdgrowth.errors import (
    BdGrowthError,
    MissingBranchLength,
    NotBinary,
    NotUltrametric,
    ParseError,
    RelativeAxisError,
    SampleTooSmall,
)
from bdgrowth.estimators import internal_branch_length

BASIC = "((A:1,B:1):1,C:2);"


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def test_parse_basic_tree():
    tree = treeio.parse_newick(BASIC)
    assert tree.tip_labels == ["A", "B", "C"]
    assert tree.root_stem is None
    assert not tree.stem_from_input


def test_parse_quoted_labels_and_comments():
    tree = treeio.parse_newick("('my leaf':1,[note]'it''s':1)root:0.5;")
    assert tree.tip_labels == ["my leaf", "it's"]
    assert tree.root.label == "root"
    assert tree.root_stem == 0.5
    assert tree.stem_from_input


def test_parse_errors_carry_offset_and_expectation():
    with pytest.raises(ParseError) as info:
        treeio.parse_newick("(A:1,B:1")
    assert info.value.offset == 8
    assert "';'" in info.value.expected or "','" in info.value.expected

    with pytest.raises(ParseError):
        treeio.parse_newick("((A:1,B:1):1,C:2)")  # missing ';'
    with pytest.raises(ParseError):
        treeio.parse_newick("(A:1,B:x);")  # bad number
    with pytest.raises(ParseError):
        treeio.parse_newick("(A:1,B:1); trailing")
    with pytest.raises(ParseError):
        treeio.parse_newick("[unclosed (A:1,B:1);")
    with pytest.raises(ParseError):
        treeio.parse_newick("   ")


def test_missing_length_is_an_error():
    with pytest.raises(MissingBranchLength):
        treeio.parse_newick("(A,B:1);")
    with pytest.raises(MissingBranchLength):
        treeio.parse_newick("((A:1,B:1),C:2);")


def test_multifurcation_parses_but_fails_extraction():
    tree = treeio.parse_newick("(A:1,B:1,C:1);")
    assert tree.n_tips == 3
    with pytest.raises(NotBinary):
        treeio.extract_coalescence_times(tree)


def test_multi_tree_file():
    trees = treeio.parse_newick_trees("(A:1,B:1);\n(C:2,D:2);")
    assert [t.n_tips for t in trees] == [2, 2]


@settings(max_examples=300, deadline=None)
@example(";")
@example("(((((")
@example("()" * 40 + ";")
@example("(" * 4000 + "A:1" + ")" * 4000 + ";")
@given(st.text(alphabet="(),:;'[]019.eAB \t-", max_size=80))
def test_parser_is_total(text):
    # any outcome is fine except an unstructured crash
    try:
        treeio.parse_newick(text)
    except BdGrowthError:
        pass


# ---------------------------------------------------------------------------
# extraction and validation
# ---------------------------------------------------------------------------


def test_extract_worked_example():
    times = treeio.extract_coalescence_times(treeio.parse_newick(BASIC))
    assert times.times == (2.0, 1.0)
    assert times.n == 3
    assert not times.branch_order
    assert times.t == 2.0


def test_extract_cherry():
    times = treeio.extract_coalescence_times(treeio.parse_newick("(A:3,B:3);"))
    assert times.times == (3.0,)


def test_non_ultrametric_rejected_with_deviation():
    tree = treeio.parse_newick("((A:1,B:2):1,C:2);")
    with pytest.raises(NotUltrametric) as info:
        treeio.extract_coalescence_times(tree)
    assert info.value.worst_deviation > 0.3


def test_tolerance_permits_rounding_jitter():
    tree = treeio.parse_newick("((A:1.000001,B:1):1,C:2.0000005);")
    times = treeio.extract_coalescence_times(tree, tol=1e-5)
    # cherry height is averaged across its two tips
    assert times.times[1] == pytest.approx(1.0000005, rel=1e-9)


def test_extract_invariant_to_child_rotation():
    rotated = treeio.parse_newick("(C:2,(B:1,A:1):1);")
    base = treeio.extract_coalescence_times(treeio.parse_newick(BASIC))
    other = treeio.extract_coalescence_times(rotated)
    assert base.times == other.times


def test_extract_single_tip_rejected():
    with pytest.raises(SampleTooSmall):
        treeio.extract_coalescence_times(treeio.parse_newick("A:1;"))


# ---------------------------------------------------------------------------
# internal branch length
# ---------------------------------------------------------------------------


def test_tree_internal_length_worked_example():
    assert treeio.tree_internal_branch_length(treeio.parse_newick(BASIC)) == 1.0


def test_tree_internal_length_includes_explicit_stem_only():
    with_stem = treeio.parse_newick("((A:1,B:1):1,C:2):0.5;")
    assert treeio.tree_internal_branch_length(with_stem) == 1.5


def test_tree_internal_length_needs_three_tips():
    with pytest.raises(SampleTooSmall):
        treeio.tree_internal_branch_length(treeio.parse_newick("(A:2,B:2);"))


def dyadic_heights(rng, n):
    # values on a 2^-8 grid keep every sum and difference exact in float64
    return rng.integers(1, 2**12, size=n - 1) / 2.0**8


def test_cpp_tree_length_equals_branch_order_formula_exactly():
    rng = np.random.default_rng(200)
    for _ in range(2000):
        n = int(rng.integers(3, 9))
        h = dyadic_heights(rng, n)
        t = float(h.max() + rng.integers(1, 50))
        times = co.CoalescenceTimes(n, tuple(h), t=t)
        tree = treeio.build_cpp_tree(times)
        assert treeio.tree_internal_branch_length(tree) == internal_branch_length(times)


# ---------------------------------------------------------------------------
# point-process construction
# ---------------------------------------------------------------------------


def test_build_cherry_with_stem():
    times = co.CoalescenceTimes(2, (3.0,), t=5.0)
    tree = treeio.build_cpp_tree(times)
    assert tree.n_tips == 2
    assert tree.root_stem == 2.0
    assert not tree.stem_from_input
    extracted = treeio.extract_coalescence_times(tree)
    assert extracted.times == (3.0,)
    assert extracted.t == 5.0


def test_build_three_tip_example_topology():
    # heights (2, 1) with T = 3: tips 2 and 3 join at depth 1, that clade
    # joins tip 1 at depth 2
    tree = treeio.build_cpp_tree(co.CoalescenceTimes(3, (2.0, 1.0), t=3.0))
    assert treeio.serialize_newick(tree) == "(t1:2,(t2:1,t3:1):1):1;"


def test_build_rejects_relative_or_invalid_heights():
    with pytest.raises(RelativeAxisError):
        treeio.build_cpp_tree(co.CoalescenceTimes(3, (-1.0, -2.0), relative=True))
    with pytest.raises(ValueError):
        treeio.build_cpp_tree(co.CoalescenceTimes(3, (5.0, 1.0), t=3.0))
    with pytest.raises(ValueError):
        treeio.build_cpp_tree(co.CoalescenceTimes(3, (-1.0, 1.0), t=3.0))


def test_build_extract_round_trip_multiset():
    rng = np.random.default_rng(201)
    for _ in range(300):
        n = int(rng.integers(2, 9))
        h = dyadic_heights(rng, n)
        times = co.CoalescenceTimes(n, tuple(h), t=float(h.max()) + 1.0)
        extracted = treeio.extract_coalescence_times(treeio.build_cpp_tree(times))
        assert sorted(extracted.times) == sorted(times.times)


def test_deep_comb_tree_does_not_overflow():
    n = 3000
    h = np.arange(n - 1, 0, -1, dtype=float)  # strictly decreasing: left comb
    times = co.CoalescenceTimes(n, tuple(h), t=float(n))
    tree = treeio.build_cpp_tree(times)
    extracted = treeio.extract_coalescence_times(tree)
    assert extracted.n == n


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_serialize_canonical_child_order():
    tree = treeio.parse_newick("((C:1,B:1):1,A:2);")
    assert treeio.serialize_newick(tree) == "(A:2,(B:1,C:1):1);"


def test_serialize_parse_round_trip_is_identity():
    for text in (BASIC, "(A:2,(B:1,C:1):1);", "(A:2,(B:1,C:1):1):0.25;"):
        once = treeio.serialize_newick(treeio.parse_newick(text))
        twice = treeio.serialize_newick(treeio.parse_newick(once))
        assert once == twice


def test_serialize_deterministic_and_quotes_when_needed():
    tree = treeio.parse_newick("('a b':1,c:1);")
    text = treeio.serialize_newick(tree)
    assert text == treeio.serialize_newick(tree)
    assert "'a b'" in text


def test_simulated_tree_survives_text_round_trip():
    times = co.CoalescenceTimes(3, (2.0, 1.0), t=3.0)
    text = treeio.serialize_newick(treeio.build_cpp_tree(times))
    recovered = treeio.extract_coalescence_times(treeio.parse_newick(text))
    assert sorted(recovered.times) == [1.0, 2.0]
    assert recovered.t == 3.0
