"""Canonical AND/OR logic templates over attribute leaves.

A template is a binary tree whose leaves are the attribute indices
1..k in left-to-right order. Templates are deduplicated under
associativity and commutativity of both operators, which is what makes
the arity-3 catalogue exactly seven entries. Execution uses min for AND
and max for OR, walking the tree bottom-up.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import CloreError

AND = "AND"
OR = "OR"

T_MAX_LIMIT = 4  # larger trees overfit long before they help


@dataclass(frozen=True)
class LogicTemplate:
    arity: int
    tree: tuple  # ("leaf", i) | (op, left, right)
    text: str    # canonical infix form

    def __repr__(self):
        return f"LogicTemplate({self.text!r})"


def _leaf(i):
    return ("leaf", i)


def _shape_key(tree):
    """Canonical form of the unlabeled shape: associative chains are
    flattened and commutative children sorted, leaves anonymized. Two
    labeled trees are the same template iff their shape keys match."""
    if tree[0] == "leaf":
        return ("L",)
    op = tree[0]
    parts = []
    for child in (tree[1], tree[2]):
        ck = _shape_key(child)
        if ck[0] == op:
            parts.extend(ck[1])
        else:
            parts.append(ck)
    return (op, tuple(sorted(parts)))


def _key_leaves(key):
    if key[0] == "L":
        return 1
    return sum(_key_leaves(c) for c in key[1])


def _tree_from_key(key, counter):
    """Binary representative of a canonical shape. Children of a
    flattened node are ordered compound-first (more leaves first), then
    left-associated; leaves are numbered in reading order."""
    if key[0] == "L":
        counter[0] += 1
        return _leaf(counter[0])
    op = key[0]
    children = sorted(key[1], key=lambda c: (-_key_leaves(c), repr(c)))
    built = [_tree_from_key(c, counter) for c in children]
    tree = built[0]
    for nxt in built[1:]:
        tree = (op, tree, nxt)
    return tree


def _infix(tree, labels=None, parent_op=None):
    """Minimal-parenthesis infix: same-operator chains print flat, a
    child is parenthesized only under the other operator."""
    if tree[0] == "leaf":
        return f"a{tree[1]}" if labels is None else f"{labels[tree[1] - 1]}(X)"
    op = tree[0]
    sym = "∧" if op == AND else "∨"
    body = f"{_infix(tree[1], labels, op)} {sym} {_infix(tree[2], labels, op)}"
    return body if parent_op is None or parent_op == op else f"({body})"


def _ops_used(tree):
    if tree[0] == "leaf":
        return frozenset()
    return frozenset({tree[0]}) | _ops_used(tree[1]) | _ops_used(tree[2])


def _all_trees(leaves):
    """Every binary tree shape with every operator labelling over the
    given ordered leaf sequence."""
    if len(leaves) == 1:
        yield _leaf(leaves[0])
        return
    for cut in range(1, len(leaves)):
        for left in _all_trees(leaves[:cut]):
            for right in _all_trees(leaves[cut:]):
                yield (AND, left, right)
                yield (OR, left, right)


def _left_chain(op_list, leaves):
    """Left-leaning tree: (((a1 op1 a2) op2 a3) ...)."""
    tree = _leaf(leaves[0])
    for op, leaf in zip(op_list, leaves[1:]):
        tree = (op, tree, _leaf(leaf))
    return tree


@lru_cache(maxsize=None)
def enumerate_templates(t_max):
    """All canonical templates of arity <= t_max. Duplicates under
    associativity/commutativity are collapsed (first representative tree
    kept); ordering is (arity, operator count, canonical text), which
    puts homogeneous conjunction/disjunction chains ahead of mixed trees
    and reproduces the published arity-3 catalogue exactly."""
    if not (1 <= t_max <= T_MAX_LIMIT):
        raise CloreError(f"t_max must be in [1, {T_MAX_LIMIT}], got {t_max}")
    out = []
    for arity in range(1, t_max + 1):
        keys = {_shape_key(tree) for tree in _all_trees(tuple(range(1, arity + 1)))}
        chosen = []
        for key in keys:
            tree = _tree_from_key(key, [0])
            chosen.append(LogicTemplate(arity, tree, _infix(tree)))
        chosen.sort(key=lambda t: (len(_ops_used(t.tree)), t.text))
        out.extend(chosen)
    return tuple(out)


def execute(template, leaf_scores):
    """Score the template over leaf scores in [0, 1].

    Extra scores beyond the template's arity are ignored. AND is min,
    OR is max, evaluated bottom-up.
    """
    scores = np.asarray(leaf_scores, dtype=np.float64)
    if scores.ndim != 1 or scores.shape[0] < template.arity:
        raise CloreError(f"need at least {template.arity} leaf scores, got shape {scores.shape}")
    if np.any(scores < 0.0) or np.any(scores > 1.0):
        raise CloreError("leaf scores must lie in [0, 1]")

    def walk(tree):
        if tree[0] == "leaf":
            return float(scores[tree[1] - 1])
        left = walk(tree[1])
        right = walk(tree[2])
        return min(left, right) if tree[0] == AND else max(left, right)

    return walk(template.tree)


def render(template, attribute_labels):
    """Human-readable form, e.g. 'label(X) = (attr1(X) ∨ attr2(X)) ∧ attr3(X)'."""
    if len(attribute_labels) < template.arity:
        raise CloreError(f"need {template.arity} labels, got {len(attribute_labels)}")
    return f"label(X) = {_infix(template.tree, labels=list(attribute_labels))}"


def template_by_text(t_max, text):
    for tpl in enumerate_templates(t_max):
        if tpl.text == text:
            return tpl
    raise CloreError(f"unknown template {text!r} at t_max={t_max}")


def compile_programs(templates):
    """Postfix programs for the fused tape kernel: opcode >= 0 pushes
    leaf (0-based), -1 applies AND, -2 applies OR."""
    programs = []
    for tpl in templates:
        prog = []

        def walk(tree):
            if tree[0] == "leaf":
                prog.append(tree[1] - 1)
            else:
                walk(tree[1])
                walk(tree[2])
                prog.append(-1 if tree[0] == AND else -2)

        walk(tpl.tree)
        programs.append(np.asarray(prog, dtype=np.int64))
    return tuple(programs)
