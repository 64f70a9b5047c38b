"""Task data model, file formats, serialization, perturbation, and the
synthetic benchmark generator.

A task is a small structured table: named columns, rows of values, a gold
class per row, and one or more natural-language explanations per class.
The generator builds suites of such tasks from a shared column/value
lexicon so that models trained on some tasks can transfer what the words
mean to tasks they have never seen.
"""

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import templates
from .errors import CloreError, TaskFormatError

log = logging.getLogger("clore.corpus")

DEFAULT_JOINER = "|"
DEFAULT_SEPARATOR = "[SEP]"
HINT_JOINER = "is claimed to be"

PERTURBATION_MODES = ("punctuated", "hinted", "verbose")

# exactly 30 words; appended by the "verbose" perturbation and shipped as
# a constant so robustness numbers are reproducible bit for bit
VERBOSE_SENTENCE = (
    "note that this entry was copied from an archive during routine upkeep "
    "and the remark you are reading here merely repeats broad filler phrasing "
    "without ever mentioning any measured properties"
)

QUANTIFIER_WORDS = ("always", "usually", "often", "likely", "sometimes", "rarely", "never")

# shared lexicon: every task draws columns and values from these pools, and
# value words are unique to their column so a value token identifies its
# predicate on its own
LEXICON = {
    "color": ["red", "blue", "green", "amber", "violet", "teal"],
    "size": ["tiny", "small", "medium", "large", "huge", "giant"],
    "shape": ["round", "square", "oval", "flat", "curved", "pointed"],
    "odor": ["pungent", "sweet", "musty", "fresh", "sour", "faint"],
    "texture": ["smooth", "rough", "fuzzy", "waxy", "grainy", "silky"],
    "weight": ["light", "heavy", "dense", "hollow", "solid", "feathery"],
    "sound": ["silent", "humming", "clicking", "buzzing", "ringing", "hissing"],
    "habitat": ["forest", "desert", "coast", "meadow", "swamp", "tundra"],
    "diet": ["seeds", "insects", "fruit", "fish", "leaves", "nectar"],
    "season": ["spring", "summer", "autumn", "winter", "monsoon", "drought"],
    "origin": ["northern", "southern", "eastern", "western", "central", "island"],
    "finish": ["matte", "glossy", "satin", "polished", "brushed", "weathered"],
}

CLASS_NAME_POOL = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"]

# seed-stream ids: all randomness fans out of one seed through these
STREAM_DATA = 0
STREAM_INIT = 1
STREAM_SHUFFLE = 2
STREAM_SPLIT = 3


def stream_rng(seed, stream, *extra):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), *map(int, extra)]))


@dataclass(frozen=True)
class RowExample:
    values: tuple
    label: str


@dataclass(frozen=True)
class GroundTruthRule:
    template_text: str               # canonical template form
    predicates: tuple                # ((column, value), ...) aligned with leaves

    def template(self, t_max):
        return templates.template_by_text(t_max, self.template_text)


@dataclass(frozen=True)
class ExplanationRecord:
    class_id: str
    text: str
    keyword_span: tuple = None       # [start, end) token range, optional
    quantifier: str = None
    rule: GroundTruthRule = None     # synthetic tasks only
    compositional: bool = False


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    columns: tuple
    classes: tuple
    rows: tuple
    explanations: tuple
    split: str = "seen"

    def __post_init__(self):
        for i, row in enumerate(self.rows):
            if len(row.values) != len(self.columns):
                raise TaskFormatError(
                    f"task {self.task_id} row {i}: {len(row.values)} values for "
                    f"{len(self.columns)} columns")
            if row.label not in self.classes:
                raise TaskFormatError(f"task {self.task_id} row {i}: unknown label {row.label!r}")
        if any(not c for c in self.columns):
            raise TaskFormatError(f"task {self.task_id}: empty column name")
        covered = {e.class_id for e in self.explanations}
        missing = [c for c in self.classes if c not in covered]
        if missing:
            raise TaskFormatError(f"task {self.task_id}: classes without explanations: {missing}")

    def explanations_for(self, class_id):
        return [e for e in self.explanations if e.class_id == class_id]


@dataclass(frozen=True)
class GeneratorConfig:
    num_tasks: int = 50
    classes_per_task: int = 3
    columns: int = 4
    values_per_column: int = 3
    rows_per_task: int = 32
    compositional_ratio: float = 0.6
    quantifier_ratio: float = 0.3
    and_probability: float = 0.5     # operator mix: chance a connective is AND
    explanations_per_class: int = 2
    require_rule_match: bool = False  # resample rows until some rule fires
    max_task_retries: int = 50


# ------------------------------------------------------------ serialization

def serialize_row(row, columns, joiner=DEFAULT_JOINER, separator=DEFAULT_SEPARATOR):
    """Render one row as text: 'col | val [SEP] col | val ...'."""
    values = row.values if isinstance(row, RowExample) else tuple(row)
    if len(values) != len(columns):
        raise CloreError(f"{len(values)} values for {len(columns)} columns")
    cells = [f"{c} {joiner} {v}" for c, v in zip(columns, values)]
    return f" {separator} ".join(cells)


def perturb(text, mode, punct="?"):
    """Apply one linguistic-bias perturbation to serialized input text."""
    if mode is None or mode == "none":
        return text
    if mode == "punctuated":
        if punct not in ("?", "..."):
            raise CloreError(f"punctuated payload must be '?' or '...', got {punct!r}")
        return f"{text} {punct}"
    if mode == "hinted":
        return text.replace(f" {DEFAULT_JOINER} ", f" {HINT_JOINER} ")
    if mode == "verbose":
        return f"{text} {VERBOSE_SENTENCE}"
    raise CloreError(f"unknown perturbation mode {mode!r}")


# ----------------------------------------------------------------- generator

_SIMPLE_PATTERNS = (
    "if the {c1} is {v1} then the label is {cls}",
    "items whose {c1} is {v1} are {cls}",
)
_AND2_PATTERNS = (
    "items with {c1} {v1} and {c2} {v2} are {cls}",
    "if the {c1} is {v1} and the {c2} is {v2} then the label is {cls}",
)
_OR2_PATTERNS = (
    "if the {c1} is {v1} or the {c2} is {v2} then the label is {cls}",
    "items with {c1} {v1} or with {c2} {v2} are {cls}",
)
_AND3_PATTERNS = (
    "if the {c1} is {v1} and the {c2} is {v2} and the {c3} is {v3} then the label is {cls}",
    "items with {c1} {v1} and {c2} {v2} and {c3} {v3} are {cls}",
)
_OR3_PATTERNS = (
    "if the {c1} is {v1} or the {c2} is {v2} or the {c3} is {v3} then the label is {cls}",
    "items with {c1} {v1} or with {c2} {v2} or with {c3} {v3} are {cls}",
)
_ANDOR_PATTERNS = (
    "if the {c1} is {v1} and the {c2} is {v2} , or the {c3} is {v3} , then the label is {cls}",
    "items with {c1} {v1} and {c2} {v2} , or with {c3} {v3} , are {cls}",
)
_ORAND_PATTERNS = (
    "if the {c1} is {v1} or the {c2} is {v2} , and also the {c3} is {v3} , then the label is {cls}",
    "items with {c1} {v1} or {c2} {v2} , and also with {c3} {v3} , are {cls}",
)

_PATTERNS_BY_TEMPLATE = {
    "a1": _SIMPLE_PATTERNS,
    "a1 ∧ a2": _AND2_PATTERNS,
    "a1 ∨ a2": _OR2_PATTERNS,
    "a1 ∧ a2 ∧ a3": _AND3_PATTERNS,
    "a1 ∨ a2 ∨ a3": _OR3_PATTERNS,
    "(a1 ∧ a2) ∨ a3": _ANDOR_PATTERNS,
    "(a1 ∨ a2) ∧ a3": _ORAND_PATTERNS,
}


def rule_matches(rule, columns, values, t_max=3):
    """Hard boolean evaluation of a ground-truth rule against one row."""
    leaf = [1.0 if values[columns.index(c)] == v else 0.0 for c, v in rule.predicates]
    return templates.execute(rule.template(t_max), leaf) >= 0.5


def label_row(rules_by_class, class_order, columns, values, default_class, t_max=3):
    """First matching class in id order wins; no match falls back to the
    designated default class."""
    for cls in class_order:
        if rule_matches(rules_by_class[cls], columns, values, t_max):
            return cls
    return default_class


def _sample_rule(rng, task_columns, task_values, compositional_ratio, and_probability):
    compositional = bool(rng.random() < compositional_ratio)
    if not compositional:
        arity = 1
        template_text = "a1"
    else:
        arity = int(rng.integers(2, 4))
        ops = [("∧" if rng.random() < and_probability else "∨") for _ in range(arity - 1)]
        if arity == 2:
            template_text = f"a1 {ops[0]} a2"
        else:
            pair = (ops[0], ops[1])
            template_text = {
                ("∧", "∧"): "a1 ∧ a2 ∧ a3",
                ("∨", "∨"): "a1 ∨ a2 ∨ a3",
                ("∧", "∨"): "(a1 ∧ a2) ∨ a3",
                ("∨", "∧"): "(a1 ∨ a2) ∧ a3",
            }[pair]
    cols = rng.choice(len(task_columns), size=arity, replace=False)
    predicates = tuple(
        (task_columns[c], task_values[task_columns[c]][int(rng.integers(0, len(task_values[task_columns[c]])))])
        for c in sorted(int(c) for c in cols)
    )
    return GroundTruthRule(template_text, predicates), compositional


def _render_explanation(rng, rule, class_id, quantifier_ratio):
    patterns = _PATTERNS_BY_TEMPLATE[rule.template_text]
    pattern = patterns[int(rng.integers(0, len(patterns)))]
    slots = {"cls": class_id}
    for i, (c, v) in enumerate(rule.predicates, start=1):
        slots[f"c{i}"] = c
        slots[f"v{i}"] = v
    text = pattern.format(**slots)
    quantifier = None
    if rng.random() < quantifier_ratio:
        quantifier = QUANTIFIER_WORDS[int(rng.integers(0, len(QUANTIFIER_WORDS)))]
        text = f"{quantifier} {text}"
    return text, quantifier


def _keyword_span(text, rule):
    """Token range [start, end) covering the first predicate's column
    through its value in the rendered explanation."""
    from .encoder import tokenize

    tokens = tokenize(text)
    col, val = rule.predicates[0]
    start = tokens.index(col)
    end = tokens.index(val) + 1
    return (start, end)


def _generate_one(rng, config, task_id):
    n_cols = len(LEXICON)
    col_idx = rng.choice(n_cols, size=config.columns, replace=False)
    all_columns = sorted(LEXICON)
    task_columns = tuple(all_columns[int(i)] for i in sorted(int(i) for i in col_idx))
    task_values = {}
    for col in task_columns:
        pool = LEXICON[col]
        vidx = rng.choice(len(pool), size=config.values_per_column, replace=False)
        task_values[col] = [pool[int(i)] for i in sorted(int(i) for i in vidx)]

    cls_idx = rng.choice(len(CLASS_NAME_POOL), size=config.classes_per_task, replace=False)
    classes = tuple(CLASS_NAME_POOL[int(i)] for i in sorted(int(i) for i in cls_idx))
    default_class = classes[-1]

    rules = {}
    flags = {}
    for cls in classes:
        rules[cls], flags[cls] = _sample_rule(
            rng, task_columns, task_values, config.compositional_ratio, config.and_probability)

    rows = []
    for _ in range(config.rows_per_task):
        for _attempt in range(200):
            values = tuple(
                task_values[c][int(rng.integers(0, len(task_values[c])))] for c in task_columns)
            if not config.require_rule_match:
                break
            if any(rule_matches(rules[cls], task_columns, values) for cls in classes):
                break
        else:
            return None
        label = label_row(rules, classes, task_columns, values, default_class)
        rows.append(RowExample(values, label))

    if any(sum(1 for r in rows if r.label == cls) == 0 for cls in classes):
        return None  # some class got no rows; caller retries

    explanations = []
    for cls in classes:
        for _ in range(config.explanations_per_class):
            text, quantifier = _render_explanation(rng, rules[cls], cls, config.quantifier_ratio)
            explanations.append(ExplanationRecord(
                class_id=cls,
                text=text,
                keyword_span=_keyword_span(text, rules[cls]),
                quantifier=quantifier,
                rule=rules[cls],
                compositional=flags[cls],
            ))

    return TaskSpec(task_id, task_columns, classes, tuple(rows), tuple(explanations))


def generate_synthetic_suite(config, seed):
    """Deterministically generate `config.num_tasks` synthetic tasks."""
    if not (0.0 <= config.compositional_ratio <= 1.0):
        raise CloreError("compositional_ratio must be in [0, 1]")
    if config.values_per_column < 2:
        raise CloreError("values_per_column must be at least 2")
    if config.classes_per_task > len(CLASS_NAME_POOL):
        raise CloreError("classes_per_task exceeds the class-name pool")
    if config.columns > len(LEXICON):
        raise CloreError("columns exceeds the lexicon")

    tasks = []
    for i in range(config.num_tasks):
        task = None
        for retry in range(config.max_task_retries):
            rng = stream_rng(seed, STREAM_DATA, i, retry)
            task = _generate_one(rng, config, f"synth-{i:03d}")
            if task is not None:
                break
        if task is None:
            raise CloreError(
                f"could not satisfy generator config for task {i} after "
                f"{config.max_task_retries} retries")
        tasks.append(task)
    return tasks


def split_seen_unseen(tasks, fraction, seed):
    """Disjoint, exhaustive, deterministic split into (seen, unseen)."""
    if len(tasks) < 2:
        raise CloreError("need at least 2 tasks to split")
    if not (0.0 < fraction < 1.0):
        raise CloreError("fraction must be in (0, 1)")
    n_seen = int(round(fraction * len(tasks)))
    n_seen = min(max(n_seen, 1), len(tasks) - 1)
    order = stream_rng(seed, STREAM_SPLIT).permutation(len(tasks))
    seen = [replace(tasks[int(i)], split="seen") for i in sorted(int(j) for j in order[:n_seen])]
    unseen = [replace(tasks[int(i)], split="unseen") for i in sorted(int(j) for j in order[n_seen:])]
    return seen, unseen


# ------------------------------------------------------------------ file IO

_TASK_KEYS = {"task_id", "columns", "classes", "rows", "explanations"}
_EXPL_KEYS = {"class", "text", "keyword_span", "quantifier", "rule", "compositional"}


def task_to_dict(task):
    doc = {
        "task_id": task.task_id,
        "columns": list(task.columns),
        "classes": list(task.classes),
        "rows": [{"values": list(r.values), "label": r.label} for r in task.rows],
        "explanations": [],
    }
    for e in task.explanations:
        rec = {"class": e.class_id, "text": e.text, "compositional": bool(e.compositional)}
        if e.keyword_span is not None:
            rec["keyword_span"] = list(e.keyword_span)
        if e.quantifier is not None:
            rec["quantifier"] = e.quantifier
        if e.rule is not None:
            rec["rule"] = {
                "template": e.rule.template_text,
                "predicates": [list(p) for p in e.rule.predicates],
            }
        doc["explanations"].append(rec)
    return doc


def save_task(task, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(task_to_dict(task), fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def _require(doc, key, where):
    if key not in doc:
        raise TaskFormatError(f"{where}: missing required field {key!r}")
    return doc[key]


def task_from_dict(doc, where="task"):
    if not isinstance(doc, dict):
        raise TaskFormatError(f"{where}: expected a JSON object")
    extras = set(doc) - _TASK_KEYS
    if extras:
        log.warning("%s: ignoring unknown fields %s", where, sorted(extras))

    task_id = _require(doc, "task_id", where)
    columns = tuple(_require(doc, "columns", where))
    classes = tuple(_require(doc, "classes", where))
    rows_doc = _require(doc, "rows", where)
    expl_doc = _require(doc, "explanations", where)

    rows = []
    for i, r in enumerate(rows_doc):
        rows.append(RowExample(tuple(_require(r, "values", f"{where} row {i}")),
                               _require(r, "label", f"{where} row {i}")))

    explanations = []
    for i, e in enumerate(expl_doc):
        extras = set(e) - _EXPL_KEYS
        if extras:
            log.warning("%s explanation %d: ignoring unknown fields %s", where, i, sorted(extras))
        rule = None
        if e.get("rule") is not None:
            rdoc = e["rule"]
            rule = GroundTruthRule(
                _require(rdoc, "template", f"{where} explanation {i} rule"),
                tuple(tuple(p) for p in _require(rdoc, "predicates", f"{where} explanation {i} rule")),
            )
        span = tuple(e["keyword_span"]) if e.get("keyword_span") is not None else None
        explanations.append(ExplanationRecord(
            class_id=_require(e, "class", f"{where} explanation {i}"),
            text=_require(e, "text", f"{where} explanation {i}"),
            keyword_span=span,
            quantifier=e.get("quantifier"),
            rule=rule,
            compositional=bool(e.get("compositional", False)),
        ))

    return TaskSpec(task_id, columns, classes, tuple(rows), tuple(explanations))


def load_task(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as err:
        raise TaskFormatError(f"{path}: invalid JSON at line {err.lineno}: {err.msg}") from err
    return task_from_dict(doc, where=str(path))


def save_manifest(entries, path):
    """Manifest: JSON list of {path, split} entries."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([{"path": p, "split": s} for p, s in entries], fh, indent=2)
        fh.write("\n")


def load_suite(manifest_path):
    """Load every task in a manifest; returns (seen, unseen) lists."""
    import os

    try:
        with open(manifest_path, encoding="utf-8") as fh:
            entries = json.load(fh)
    except json.JSONDecodeError as err:
        raise TaskFormatError(f"{manifest_path}: invalid JSON: {err.msg}") from err
    if not isinstance(entries, list):
        raise TaskFormatError(f"{manifest_path}: manifest must be a JSON list")
    base = os.path.dirname(os.path.abspath(manifest_path))
    seen, unseen = [], []
    for i, entry in enumerate(entries):
        p = _require(entry, "path", f"{manifest_path} entry {i}")
        split = _require(entry, "split", f"{manifest_path} entry {i}")
        if split not in ("seen", "unseen"):
            raise TaskFormatError(f"{manifest_path} entry {i}: bad split {split!r}")
        full = p if os.path.isabs(p) else os.path.join(base, p)
        task = replace(load_task(full), split=split)
        (seen if split == "seen" else unseen).append(task)
    return seen, unseen
