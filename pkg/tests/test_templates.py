import numpy as np
import pytest
from hypothesis import given, strategies as st

from clore import templates
from clore.errors import CloreError
from clore.templates import AND, OR, enumerate_templates, execute, render


def interpret(tree, scores):
    """Independent recursive interpreter used as the oracle for execute."""
    kind = tree[0]
    if kind == "leaf":
        return scores[tree[1] - 1]
    a = interpret(tree[1], scores)
    b = interpret(tree[2], scores)
    return min(a, b) if kind == AND else max(a, b)


def canonical_class(tree):
    """Oracle canonicalizer, written independently of the package's:
    renders the unlabeled shape as a string, flattening same-operator
    chains and sorting the children of commutative nodes."""
    if tree[0] == "leaf":
        return "*"
    op = tree[0]
    bag = []
    stack = [tree[1], tree[2]]
    while stack:
        node = stack.pop()
        if node[0] == op:
            stack.extend([node[1], node[2]])
        else:
            bag.append(canonical_class(node))
    return op + "[" + ",".join(sorted(bag)) + "]"


def all_labelled_trees(leaves):
    if len(leaves) == 1:
        yield ("leaf", leaves[0])
        return
    for cut in range(1, len(leaves)):
        for lhs in all_labelled_trees(leaves[:cut]):
            for rhs in all_labelled_trees(leaves[cut:]):
                yield (AND, lhs, rhs)
                yield (OR, lhs, rhs)


class TestEnumeration:
    def test_counts_for_small_t(self):
        assert len(enumerate_templates(1)) == 1
        assert len(enumerate_templates(2)) == 3
        assert len(enumerate_templates(3)) == 7

    def test_t3_matches_published_catalogue(self):
        texts = [t.text for t in enumerate_templates(3)]
        assert texts == [
            "a1",
            "a1 ∧ a2",
            "a1 ∨ a2",
            "a1 ∧ a2 ∧ a3",
            "a1 ∨ a2 ∨ a3",
            "(a1 ∧ a2) ∨ a3",
            "(a1 ∨ a2) ∧ a3",
        ]

    def test_t4_count_equals_bruteforce_oracle(self):
        expected = 0
        for arity in range(1, 5):
            classes = {canonical_class(t) for t in all_labelled_trees(tuple(range(1, arity + 1)))}
            expected += len(classes)
        assert len(enumerate_templates(4)) == expected

    def test_leaves_appear_once_in_order(self):
        for tpl in enumerate_templates(4):
            seen = []

            def walk(node):
                if node[0] == "leaf":
                    seen.append(node[1])
                else:
                    walk(node[1])
                    walk(node[2])

            walk(tpl.tree)
            assert seen == sorted(seen)
            assert sorted(seen) == list(range(1, tpl.arity + 1))

    def test_out_of_range_rejected(self):
        with pytest.raises(CloreError):
            enumerate_templates(0)
        with pytest.raises(CloreError):
            enumerate_templates(5)


class TestExecute:
    def test_and_is_min(self):
        tpl = enumerate_templates(3)[1]
        assert execute(tpl, [0.9, 0.4]) == pytest.approx(0.4)

    def test_mixed_composition(self):
        tpl = templates.template_by_text(3, "(a1 ∧ a2) ∨ a3")
        assert execute(tpl, [0.2, 0.8, 0.7]) == pytest.approx(0.7)

    def test_excess_scores_ignored(self):
        tpl = enumerate_templates(3)[0]
        assert execute(tpl, [0.3, 0.99, 0.99]) == pytest.approx(0.3)

    def test_against_independent_interpreter(self):
        rng = np.random.default_rng(17)
        for tpl in enumerate_templates(3):
            for _ in range(1000):
                scores = rng.uniform(0.0, 1.0, size=3)
                assert execute(tpl, scores) == interpret(tpl.tree, scores)

    def test_scores_outside_unit_interval_rejected(self):
        tpl = enumerate_templates(2)[1]
        with pytest.raises(CloreError):
            execute(tpl, [0.5, 1.2])
        with pytest.raises(CloreError):
            execute(tpl, [-0.1, 0.5])

    @given(
        st.integers(min_value=0, max_value=6),
        st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=3, max_size=3),
        st.integers(min_value=0, max_value=2),
        st.floats(min_value=0.0, max_value=1.0),
    )
    def test_monotone_in_every_leaf(self, tpl_idx, scores, leaf, bump):
        tpl = enumerate_templates(3)[tpl_idx]
        raised = list(scores)
        raised[leaf] = min(1.0, raised[leaf] + bump)
        assert execute(tpl, raised) >= execute(tpl, scores)

    @given(
        st.integers(min_value=0, max_value=6),
        st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=3, max_size=3),
    )
    def test_output_bounded_by_leaf_scores(self, tpl_idx, scores):
        tpl = enumerate_templates(3)[tpl_idx]
        used = scores[: tpl.arity]
        out = execute(tpl, scores)
        assert min(used) <= out <= max(used)


class TestRender:
    def test_arity_one(self):
        tpl = enumerate_templates(1)[0]
        assert render(tpl, ["attr1"]) == "label(X) = attr1(X)"

    def test_mixed_parenthesization(self):
        tpl = templates.template_by_text(3, "(a1 ∨ a2) ∧ a3")
        assert render(tpl, ["attr1", "attr2", "attr3"]) == (
            "label(X) = (attr1(X) ∨ attr2(X)) ∧ attr3(X)"
        )

    def test_chains_render_flat(self):
        tpl = templates.template_by_text(3, "a1 ∧ a2 ∧ a3")
        assert render(tpl, ["p", "q", "r"]) == "label(X) = p(X) ∧ q(X) ∧ r(X)"

    def test_text_round_trip_is_fixpoint(self):
        for t_max in (1, 2, 3, 4):
            for tpl in enumerate_templates(t_max):
                assert templates.template_by_text(t_max, tpl.text) is tpl


class TestPrograms:
    def test_programs_agree_with_execute(self):
        from clore.diffmath import Tape

        rng = np.random.default_rng(3)
        tpls = enumerate_templates(3)
        programs = templates.compile_programs(tpls)
        for _ in range(200):
            scores = rng.uniform(0.0, 1.0, size=3)
            t = Tape()
            s = t.exec_templates(t.leaf(scores), programs)
            expected = [execute(tpl, scores) for tpl in tpls]
            np.testing.assert_allclose(s.data, expected, rtol=0, atol=0)
