"""Tokenization and trainable embeddings.

Texts are lowercased and whitespace-split with a small set of punctuation
marks detached as their own tokens; "[SEP]" survives as a single special
token. Embeddings come from a trainable table plus a learned mean-pool
projection that produces the sentence vector used to seed the parser.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .corpus import STREAM_INIT, stream_rng
from .errors import CloreError

log = logging.getLogger("clore.encoder")

PAD, UNK, SEP = "[PAD]", "[UNK]", "[SEP]"
DETACHED_PUNCT = set(".,?!'\"():")
MAX_TOKENS = 128


def tokenize(text):
    """Lowercased whitespace split; punctuation in {. , ? ! ' \" ( ) :}
    becomes separate tokens; '[SEP]' is kept whole; empty text maps to
    a single [UNK]."""
    tokens = []
    for chunk in text.split():
        if chunk == SEP:
            tokens.append(SEP)
            continue
        word = []
        for ch in chunk.lower():
            if ch in DETACHED_PUNCT:
                if word:
                    tokens.append("".join(word))
                    word = []
                tokens.append(ch)
            else:
                word.append(ch)
        if word:
            tokens.append("".join(word))
    return tokens if tokens else [UNK]


class Vocabulary:
    """Dense token -> id map with [PAD]=0, [UNK]=1, [SEP]=2 always present."""

    def __init__(self, tokens=()):
        self.id_of = {PAD: 0, UNK: 1, SEP: 2}
        for tok in tokens:
            if tok not in self.id_of:
                self.id_of[tok] = len(self.id_of)
        self.tokens = [t for t, _ in sorted(self.id_of.items(), key=lambda kv: kv[1])]

    def __len__(self):
        return len(self.id_of)

    def __contains__(self, tok):
        return tok in self.id_of

    def ids(self, tokens):
        unk = self.id_of[UNK]
        return np.asarray([self.id_of.get(t, unk) for t in tokens], dtype=np.int64)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for i, tok in enumerate(self.tokens):
                fh.write(f"{tok}\t{i}\n")

    @classmethod
    def load(cls, path):
        pairs = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                tok, _, idx = line.partition("\t")
                pairs.append((int(idx), tok))
        pairs.sort()
        vocab = cls()
        for idx, tok in pairs:
            if tok in (PAD, UNK, SEP):
                continue
            vocab.id_of[tok] = len(vocab.id_of)
        vocab.tokens = [t for t, _ in sorted(vocab.id_of.items(), key=lambda kv: kv[1])]
        return vocab


def build_vocabulary(tasks):
    """Vocabulary over the union of explanation texts and default-form
    serialized rows of the given (seen) tasks; sorted for determinism."""
    from .corpus import serialize_row

    seen = set()
    for task in tasks:
        for expl in task.explanations:
            seen.update(tokenize(expl.text))
        for row in task.rows:
            seen.update(tokenize(serialize_row(row, task.columns)))
    seen -= {PAD, UNK, SEP}
    return Vocabulary(sorted(seen))


@dataclass
class EmbeddingTable:
    """Token vectors plus the sentence-pooling projection. The arrays are
    the live parameter buffers; the trainer mutates them in place."""

    matrix: np.ndarray     # |V| x d
    pool_w: np.ndarray     # d x d
    pool_b: np.ndarray     # d
    frozen: bool = False
    pretrained_hits: int = 0

    @property
    def dim(self):
        return self.matrix.shape[1]

    @classmethod
    def create(cls, vocab, dim, seed):
        rng = stream_rng(seed, STREAM_INIT)
        matrix = rng.normal(0.0, 0.02, size=(len(vocab), dim))
        pool_w = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(dim, dim))
        pool_b = np.zeros(dim)
        return cls(matrix, pool_w, pool_b)


@dataclass(frozen=True)
class EncodedInput:
    """Token feature sequence x_1..x_K plus the pooled sentence vector."""

    tokens: tuple
    token_vectors: np.ndarray   # K x d
    sentence_vector: np.ndarray  # d
    text: str

    def __post_init__(self):
        if self.token_vectors.shape[0] < 1:
            raise CloreError("encoded input needs at least one token")


def encode_graph(tape, table_value, pool_w_value, pool_b_value, ids):
    """Differentiable encoding on an existing tape; returns (X, sentence)."""
    x = tape.gather(table_value, ids)
    pooled = tape.mean(x)
    sent = tape.tanh(tape.add(tape.matvec(pool_w_value, pooled), pool_b_value))
    return x, sent


def encode(tokens, table, vocab, max_tokens=MAX_TOKENS):
    """Encode a token list with the table: pure function of its inputs."""
    from .diffmath import Tape

    tokens = list(tokens)[:max_tokens]
    if not tokens:
        tokens = [UNK]
    ids = vocab.ids(tokens)
    tape = Tape()
    tv = tape.leaf(table.matrix, const=True)
    pw = tape.leaf(table.pool_w, const=True)
    pb = tape.leaf(table.pool_b, const=True)
    x, sent = encode_graph(tape, tv, pw, pb, ids)
    return EncodedInput(tuple(tokens), x.data.copy(), sent.data.copy(), " ".join(tokens))


def encode_text(text, table, vocab, max_tokens=MAX_TOKENS):
    return encode(tokenize(text), table, vocab, max_tokens=max_tokens)


def load_pretrained_vectors(path, vocab, dim, seed=1, frozen=False):
    """Build a table from `token<TAB>v1 ... vd` lines; vocabulary tokens
    missing from the file keep their seeded random rows."""
    table = EmbeddingTable.create(vocab, dim, seed)
    hits = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            tok, _, rest = line.partition("\t")
            parts = rest.split()
            if len(parts) != dim:
                raise CloreError(
                    f"{path}:{lineno}: expected {dim} components, got {len(parts)}")
            if tok in vocab:
                table.matrix[vocab.id_of[tok]] = [float(p) for p in parts]
                hits += 1
    table.pretrained_hits = hits
    table.frozen = frozen
    log.info("loaded %d pretrained vectors covering %d/%d vocabulary tokens",
             hits, hits, len(vocab))
    return table
