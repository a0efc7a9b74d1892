"""Top-k association queries against the basis matrices.

Default axes: ``bigram`` reads the row of ``bbar`` (what follows the query
token), ``context`` reads the row of ``phibar`` (what shows up in the query
token's prefix) and ``interchangeability`` is symmetric.  The query token
itself is never filtered out.
"""

import json
from dataclasses import dataclass

from .errors import DimensionError, UnknownTokenError

BASES = ("bigram", "interchangeability", "context")
_MATRIX = {"bigram": "bbar", "interchangeability": "sigma", "context": "phibar"}


@dataclass(frozen=True)
class AssociationQuery:
    token: str
    basis: str = "context"
    k: int = 30
    direction: str = "row"

    def __post_init__(self):
        if self.basis not in BASES:
            raise ValueError(f"basis must be one of {BASES}")
        if self.direction not in ("row", "column"):
            raise ValueError("direction must be 'row' or 'column'")
        if self.k < 1:
            raise ValueError("k must be >= 1")


def topk(query, stats, vocab):
    """Ranked ``(token, score)`` pairs, highest score first, ties broken by token."""
    if query.token not in vocab:
        raise UnknownTokenError(query.token)
    if len(vocab) != stats.vocab:
        raise DimensionError(f"vocabulary has {len(vocab)} tokens, stats {stats.vocab}")
    mat = getattr(stats, _MATRIX[query.basis])
    i = vocab.id_of[query.token]
    scores = mat[i] if query.direction == "row" else mat[:, i]
    k = min(query.k, len(vocab))
    order = sorted(range(len(vocab)), key=lambda j: (-scores[j], vocab.tokens[j]))[:k]
    return [(vocab.tokens[j], float(scores[j])) for j in order]


def dump_association_table(tokens, stats, vocab, k=10, bases=BASES, fmt="text"):
    """One column per (token, basis) pair; unknown tokens get an error marker."""
    columns = []
    for tok in tokens:
        for basis in bases:
            head = f"{tok}/{basis}"
            try:
                cells = [f"{t} {s:+.4e}" for t, s in topk(AssociationQuery(tok, basis, k),
                                                          stats, vocab)]
            except UnknownTokenError:
                cells = ["<unknown token>"]
            columns.append((head, cells))
    if fmt == "json":
        return json.dumps([{"column": h, "entries": c} for h, c in columns], indent=2) + "\n"
    if not columns:
        return "rank\n"
    depth = max(len(c) for _, c in columns)
    widths = [max(len(h), *(len(x) for x in c)) for h, c in columns]
    lines = ["rank  " + "  ".join(h.ljust(w) for (h, _), w in zip(columns, widths))]
    for r in range(depth):
        cells = [(c[r] if r < len(c) else "").ljust(w) for (_, c), w in zip(columns, widths)]
        lines.append(f"{r + 1:<4}  " + "  ".join(cells))
    return "\n".join(line.rstrip() for line in lines) + "\n"
