"""Corpus co-occurrence lift and the cannot-link matrix derived from it.

A corpus is a list of documents, each a set of terms drawn from two
disjoint vocabularies (row terms such as diagnoses, column terms such as
medications). Counting is by document presence, not term frequency.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .objective import CannotLinkMatrix


class CorpusFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Corpus:
    vocab_rows: tuple
    vocab_cols: tuple
    docs: tuple

    def __post_init__(self):
        rows = tuple(self.vocab_rows)
        cols = tuple(self.vocab_cols)
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            raise CorpusFormatError("vocabularies must be duplicate-free")
        overlap = set(rows) & set(cols)
        if overlap:
            raise CorpusFormatError(f"vocabularies overlap: {sorted(overlap)[:5]}")
        if not rows or not cols:
            raise CorpusFormatError("both vocabularies must be non-empty")
        docs = tuple(frozenset(d) for d in self.docs)
        if not docs:
            raise CorpusFormatError("corpus has no documents")
        known = set(rows) | set(cols)
        for n, doc in enumerate(docs):
            unknown = doc - known
            if unknown:
                raise CorpusFormatError(
                    f"document {n} has unknown term(s) {sorted(unknown)[:5]}"
                )
        object.__setattr__(self, "vocab_rows", rows)
        object.__setattr__(self, "vocab_cols", cols)
        object.__setattr__(self, "docs", docs)

    @property
    def n_docs(self) -> int:
        return len(self.docs)

    def swapped(self) -> "Corpus":
        return Corpus(self.vocab_cols, self.vocab_rows, self.docs)

    def incidence(self):
        """Document-by-term 0/1 matrices for the row and column vocabularies."""
        row_index = {t: j for j, t in enumerate(self.vocab_rows)}
        col_index = {t: k for k, t in enumerate(self.vocab_cols)}
        r_doc, r_term, c_doc, c_term = [], [], [], []
        for d, doc in enumerate(self.docs):
            for term in doc:
                if term in row_index:
                    r_doc.append(d)
                    r_term.append(row_index[term])
                else:
                    c_doc.append(d)
                    c_term.append(col_index[term])
        shape_r = (self.n_docs, len(self.vocab_rows))
        shape_c = (self.n_docs, len(self.vocab_cols))
        D_r = sp.csr_matrix((np.ones(len(r_doc)), (r_doc, r_term)), shape=shape_r)
        D_c = sp.csr_matrix((np.ones(len(c_doc)), (c_doc, c_term)), shape=shape_c)
        return D_r, D_c


@dataclass(frozen=True)
class LiftTable:
    n_docs: int
    row_counts: np.ndarray
    col_counts: np.ndarray
    joint_counts: np.ndarray

    @property
    def dims(self) -> tuple:
        return self.joint_counts.shape

    @property
    def defined(self) -> np.ndarray:
        return np.outer(self.row_counts > 0, self.col_counts > 0)

    @property
    def lift(self) -> np.ndarray:
        """``N * n_jk / (n_j * n_k)``; NaN where either term never occurs."""
        denom = np.outer(self.row_counts, self.col_counts).astype(np.float64)
        out = np.full(self.dims, np.nan)
        ok = denom > 0
        out[ok] = self.n_docs * self.joint_counts[ok] / denom[ok]
        return out


def compute_lift(corpus: Corpus) -> LiftTable:
    D_r, D_c = corpus.incidence()
    joint = np.asarray((D_r.T @ D_c).todense()).astype(np.int64)
    return LiftTable(
        n_docs=corpus.n_docs,
        row_counts=np.asarray(D_r.sum(axis=0)).ravel().astype(np.int64),
        col_counts=np.asarray(D_c.sum(axis=0)).ravel().astype(np.int64),
        joint_counts=joint,
    )


def build_cannot_link(lifts: LiftTable, alpha: float = 1.0,
                      constrain_undefined: bool = False) -> CannotLinkMatrix:
    """Pairs whose lift is strictly below ``alpha``.

    Pairs with undefined lift (a term absent from the corpus) are left
    unconstrained unless ``constrain_undefined`` is set.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    lift = lifts.lift
    with np.errstate(invalid="ignore"):
        mask = lift < alpha
    if constrain_undefined:
        mask |= ~lifts.defined
    return CannotLinkMatrix(lifts.dims, np.argwhere(mask))


def read_vocab(path) -> list:
    with open(path, encoding="utf-8") as fh:
        terms = [line.rstrip("\n\r") for line in fh]
    while terms and terms[-1] == "":
        terms.pop()
    for n, term in enumerate(terms, start=1):
        if not term.strip():
            raise CorpusFormatError(f"{path}:{n}: empty vocabulary term")
    return terms


def parse_corpus_lines(lines: Sequence[str], vocab_rows, vocab_cols, source="<corpus>") -> Corpus:
    """One document per line, terms separated by tabs. A blank line is an empty document."""
    known = set(vocab_rows) | set(vocab_cols)
    docs = []
    for n, line in enumerate(lines, start=1):
        line = line.rstrip("\n\r")
        terms = [t for t in line.split("\t") if t != ""]
        for t in terms:
            if t not in known:
                raise CorpusFormatError(f"{source}:{n}: unknown term {t!r}")
        docs.append(terms)
    if not docs:
        raise CorpusFormatError(f"{source}: corpus has no documents")
    return Corpus(tuple(vocab_rows), tuple(vocab_cols), tuple(docs))


def read_corpus(path, row_vocab_path, col_vocab_path) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    return parse_corpus_lines(lines, read_vocab(row_vocab_path), read_vocab(col_vocab_path),
                              source=str(path))


def write_corpus(path, corpus: Corpus) -> None:
    order = {t: n for n, t in enumerate(corpus.vocab_rows + corpus.vocab_cols)}
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.docs:
            fh.write("\t".join(sorted(doc, key=order.__getitem__)) + "\n")


def write_vocab(path, terms) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in terms:
            fh.write(f"{t}\n")
