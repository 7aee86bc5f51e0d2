"""Recursive deterministic protocol built from monochromatic rectangles.

At a node with submatrix ``S`` and a monochromatic rectangle ``R`` inside it,
write ``S = [[R, A], [B, C]]``.  Either ``[R A]`` or ``[R; B]`` has rank at
most ``rank(S)/2 + 3/2``.  In the first case Alice says whether her row is in
``R``'s rows (bit 0) or not (bit 1); in the second Bob does the same for his
column.  A 0 roughly halves the rank, a 1 shrinks the area.  Submatrices of
rank at most 2 are finished by Alice sending her entries in two independent
columns; single entries need no bits at all.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .finder import SamplerConfig, extract_mono, find_almost_mono
from .matrix import IntegralMatrix, Rectangle, dedup_view, exact_rank, rank_of

ALICE = "alice"
BOB = "bob"

Finder = Callable[[IntegralMatrix, int], Rectangle]


class PartialBuildError(RuntimeError):
    def __init__(self, msg, nodes, depth):
        super().__init__(msg)
        self.nodes = nodes
        self.depth = depth


class VerificationError(AssertionError):
    def __init__(self, msg, pair=None):
        super().__init__(msg)
        self.pair = pair


@dataclass(frozen=True)
class BuildLimits:
    max_nodes: int = 1_000_000
    max_depth: int = 100_000


@dataclass
class ProtocolNode:
    """One node of the protocol tree.

    ``kind`` is ``"internal"``, ``"leaf_entry"`` or ``"leaf_lowrank"``.
    Low-rank leaves keep the root indices of their (at most two) basis
    columns and, per column ``b`` of the view, coefficients ``(v_b, v'_b)``
    with ``S[:, b] = v_b * S[:, c1] + v'_b * S[:, c2]``.
    """

    view: Rectangle
    rank: int
    kind: str
    speaker: str | None = None
    split_rect: Rectangle | None = None
    child0: "ProtocolNode | None" = None
    child1: "ProtocolNode | None" = None
    value: int | None = None
    columns: tuple[int, ...] = ()
    coeffs: dict[int, tuple[Fraction, ...]] = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def is_leaf(self) -> bool:
        return self.kind != "internal"

    def child(self, bit: int) -> "ProtocolNode":
        return self.child0 if bit == 0 else self.child1

    def leaves(self):
        if self.is_leaf:
            yield self
            return
        yield from self.child0.leaves()
        yield from self.child1.leaves()

    def internal_nodes(self):
        if self.is_leaf:
            return
        yield self
        yield from self.child0.internal_nodes()
        yield from self.child1.internal_nodes()

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, "rank": self.rank, "view": self.view.to_dict()}
        if self.kind == "internal":
            doc.update(speaker=self.speaker, split=self.split_rect.to_dict(),
                       child0=self.child0.to_dict(), child1=self.child1.to_dict())
        elif self.kind == "leaf_entry":
            doc["value"] = self.value
        else:
            doc["columns"] = list(self.columns)
            doc["coeffs"] = {str(b): [str(c) for c in cs] for b, cs in sorted(self.coeffs.items())}
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ProtocolNode":
        view = Rectangle(tuple(doc["view"]["rows"]), tuple(doc["view"]["cols"]))
        node = cls(view, int(doc["rank"]), doc["kind"])
        if node.kind == "internal":
            node.speaker = doc["speaker"]
            node.split_rect = Rectangle(tuple(doc["split"]["rows"]), tuple(doc["split"]["cols"]))
            node.child0 = cls.from_dict(doc["child0"])
            node.child1 = cls.from_dict(doc["child1"])
        elif node.kind == "leaf_entry":
            node.value = int(doc["value"])
        else:
            node.columns = tuple(doc["columns"])
            node.coeffs = {int(b): tuple(Fraction(c) for c in cs) for b, cs in doc["coeffs"].items()}
        return node


@dataclass
class ProtocolTree:
    """A built protocol together with the matrix it computes."""

    matrix: IntegralMatrix
    root: ProtocolNode

    @property
    def payload_width(self) -> int:
        return payload_width(self.matrix.delta)

    def leaves(self) -> list[ProtocolNode]:
        return list(self.root.leaves())

    def to_dict(self) -> dict:
        return {"delta": self.matrix.delta, "rows": self.matrix.tolist(), "root": self.root.to_dict()}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "ProtocolTree":
        return cls(IntegralMatrix.from_rows(doc["rows"], doc["delta"]), ProtocolNode.from_dict(doc["root"]))


def payload_width(delta: int) -> int:
    """Bits per base-case value in ``[0, delta]``."""
    return math.ceil(math.log2(delta + 1)) if delta > 0 else 0


# ---------------------------------------------------------------- one step


@dataclass(frozen=True)
class ReduceCase:
    kind: str  # "row" (Alice speaks) or "col" (Bob speaks)
    row_block_rank: int
    col_block_rank: int


def rank_reduce_case(M: IntegralMatrix, S: Rectangle, R: Rectangle,
                     rank_S: int | None = None) -> ReduceCase:
    """Pick the block ``[R A]`` ("row") or ``[R; B]`` ("col") of rank at most
    ``rank(S)/2 + 3/2``.

    A case whose complementary block is empty would not shrink anything, so
    proper splits are preferred; among those the row case wins ties.
    """
    if rank_S is None:
        rank_S = rank_of(M, S)
    r_row = rank_of(M, Rectangle(R.row_ids, S.col_ids))
    r_col = rank_of(M, Rectangle(S.row_ids, R.col_ids))
    ok_row = 2 * r_row <= rank_S + 3
    ok_col = 2 * r_col <= rank_S + 3
    proper_row = len(R.row_ids) < len(S.row_ids)
    proper_col = len(R.col_ids) < len(S.col_ids)
    for kind, ok, proper in (("row", ok_row, proper_row), ("col", ok_col, proper_col)):
        if ok and proper:
            return ReduceCase(kind, r_row, r_col)
    if ok_row:
        return ReduceCase("row", r_row, r_col)
    if ok_col:
        return ReduceCase("col", r_row, r_col)
    raise AssertionError(f"neither block meets the rank bound: rank(S)={rank_S}, "
                         f"rank[R A]={r_row}, rank[R;B]={r_col}")


def sampling_finder(config: SamplerConfig | None = None) -> Finder:
    """Finder that samples an almost-monochromatic rectangle and extracts a
    monochromatic one from it."""
    config = config or SamplerConfig()

    def find(sub: IntegralMatrix, r: int) -> Rectangle:
        cand = find_almost_mono(sub, r, config)
        return extract_mono(sub, cand.rect, r)

    find.config = config
    return find


# ---------------------------------------------------------------- building


def _lowrank_leaf(M: IntegralMatrix, S: Rectangle, rank: int) -> ProtocolNode:
    node = ProtocolNode(S, rank, "leaf_lowrank")
    if rank == 0:
        return node
    block = M.view(S)
    cert = exact_rank(block)
    cols = [int(p) for p in cert.pivot_cols]
    prow = [int(p) for p in cert.pivot_rows]
    node.columns = tuple(S.col_ids[p] for p in cols)
    basis = [[Fraction(int(block[i, c])) for c in cols] for i in prow]
    for pos, b in enumerate(S.col_ids):
        rhs = [Fraction(int(block[i, pos])) for i in prow]
        node.coeffs[b] = _solve(basis, rhs)
    for i in range(block.shape[0]):
        for pos, b in enumerate(S.col_ids):
            got = sum(int(block[i, c]) * x for c, x in zip(cols, node.coeffs[b]))
            if got != block[i, pos]:
                raise AssertionError("low-rank reconstruction is not exact")
    return node


def _solve(A: list[list[Fraction]], y: list[Fraction]) -> tuple[Fraction, ...]:
    if len(A) == 1:
        return (y[0] / A[0][0],)
    (a, b), (c, d) = A
    det = a * d - b * c
    return ((y[0] * d - b * y[1]) / det, (a * y[1] - c * y[0]) / det)


def _expand(groups: dict[int, list[int]], reps: tuple[int, ...], order: tuple[int, ...]) -> tuple[int, ...]:
    chosen = {x for rep in reps for x in groups[rep]}
    return tuple(x for x in order if x in chosen)


def build_protocol(M: IntegralMatrix, finder: Finder | None = None,
                   limits: BuildLimits | None = None) -> ProtocolTree:
    """Build the protocol tree for ``M``.

    ``finder(sub, r)`` must return a non-empty monochromatic rectangle of the
    matrix ``sub`` (indices local to ``sub``).  It is always called on the
    deduplicated view, and its answer is expanded back over duplicate lines.
    """
    finder = finder or sampling_finder()
    limits = limits or BuildLimits()
    count = [0]

    def grow(S: Rectangle, depth: int) -> ProtocolNode:
        count[0] += 1
        if count[0] > limits.max_nodes or depth > limits.max_depth:
            raise PartialBuildError(f"build limits exceeded at node {count[0]}, depth {depth}",
                                    count[0], depth)
        if S.area == 1:
            a, b = S.row_ids[0], S.col_ids[0]
            return ProtocolNode(S, rank_of(M, S), "leaf_entry", value=int(M.entries[a, b]))
        rank = rank_of(M, S)
        if rank <= 2:
            return _lowrank_leaf(M, S, rank)

        reps, row_groups, col_groups = dedup_view(M, S)
        sub = M.submatrix(reps)
        local = finder(sub, rank)
        if local.is_empty:
            raise AssertionError("finder returned an empty rectangle")
        if len(np.unique(sub.view(local))) != 1:
            raise AssertionError("finder returned a rectangle that is not monochromatic")
        R = Rectangle(_expand(row_groups, tuple(reps.row_ids[i] for i in local.row_ids), S.row_ids),
                      _expand(col_groups, tuple(reps.col_ids[j] for j in local.col_ids), S.col_ids))

        case = rank_reduce_case(M, S, R, rank)
        if case.kind == "row":
            rest = tuple(a for a in S.row_ids if a not in set(R.row_ids))
            zero, one, speaker = Rectangle(R.row_ids, S.col_ids), Rectangle(rest, S.col_ids), ALICE
        else:
            rest = tuple(b for b in S.col_ids if b not in set(R.col_ids))
            zero, one, speaker = Rectangle(S.row_ids, R.col_ids), Rectangle(S.row_ids, rest), BOB

        node = ProtocolNode(S, rank, "internal", speaker=speaker, split_rect=R)
        node.info = {"block_ranks": [case.row_block_rank, case.col_block_rank],
                     "delta_hat": -math.log(R.area / S.area)}
        node.child0 = grow(zero, depth + 1)
        node.child1 = grow(one, depth + 1)
        if 2 * node.child0.rank > rank + 3:
            raise AssertionError("0-child rank above rank/2 + 3/2")
        return node

    return ProtocolTree(M, grow(M.full_rect(), 0))


# ---------------------------------------------------------------- running


@dataclass
class Transcript:
    bits: list[tuple[str, int]]
    payload: list[int]
    payload_width: int
    output: int

    @property
    def bit_count(self) -> int:
        return len(self.bits) + self.payload_width * len(self.payload)

    def to_dict(self) -> dict:
        return {"bits": [[s, b] for s, b in self.bits], "payload": self.payload,
                "payload_width": self.payload_width, "output": self.output,
                "bit_count": self.bit_count}


class _Agent:
    """A player who knows the agreed tree, the function, and one input."""

    def __init__(self, tree: ProtocolTree):
        self.tree = tree
        self.node = tree.root

    def hear(self, bit: int) -> None:
        self.node = self.node.child(bit)


class Alice(_Agent):
    name = ALICE

    def __init__(self, tree, a):
        super().__init__(tree)
        self.a = a

    def speak(self) -> int:
        return 0 if self.a in self.node.child0.view.row_ids else 1

    def send_entries(self) -> list[int]:
        # her own entries in the leaf's basis columns
        return [int(self.tree.matrix.entries[self.a, c]) for c in self.node.columns]


class Bob(_Agent):
    name = BOB

    def __init__(self, tree, b):
        super().__init__(tree)
        self.b = b

    def speak(self) -> int:
        return 0 if self.b in self.node.child0.view.col_ids else 1

    def combine(self, entries: list[int]) -> int:
        coeffs = self.node.coeffs.get(self.b, ())
        value = sum(x * c for x, c in zip(entries, coeffs)) if entries else Fraction(0)
        if Fraction(value).denominator != 1:
            raise VerificationError(f"non-integral output {value}")
        return int(value)


def run(tree: ProtocolTree, a: int, b: int) -> Transcript:
    """Simulate the two players on inputs ``a`` (Alice) and ``b`` (Bob)."""
    M = tree.matrix
    if not (0 <= a < M.n_rows and 0 <= b < M.n_cols):
        raise IndexError(f"input ({a}, {b}) out of range")
    alice, bob = Alice(tree, a), Bob(tree, b)
    bits = []
    while not alice.node.is_leaf:
        speaker = alice if alice.node.speaker == ALICE else bob
        bit = speaker.speak()
        bits.append((speaker.name, bit))
        alice.hear(bit)
        bob.hear(bit)
    assert alice.node is bob.node
    leaf = alice.node
    if leaf.kind == "leaf_entry":
        return Transcript(bits, [], tree.payload_width, leaf.value)
    entries = alice.send_entries()
    return Transcript(bits, entries, tree.payload_width, bob.combine(entries))


# ---------------------------------------------------------------- checking


@dataclass
class ProtocolStats:
    leaves: int
    depth: int
    max_bits: int
    root_rank: int
    rank_trajectory: list[tuple[int, int]]
    empirical_delta: list[float]
    internal_nodes: int = 0

    def to_dict(self) -> dict:
        return {"leaves": self.leaves, "depth": self.depth, "max_bits": self.max_bits,
                "root_rank": self.root_rank, "internal_nodes": self.internal_nodes,
                "rank_trajectory": [list(p) for p in self.rank_trajectory],
                "empirical_delta": self.empirical_delta}


def leaf_cover(tree: ProtocolTree) -> np.ndarray:
    """How many leaf views contain each entry (should be all ones)."""
    cover = np.zeros(tree.matrix.shape, dtype=np.int64)
    for leaf in tree.leaves():
        cover[np.ix_(leaf.view.row_ids, leaf.view.col_ids)] += 1
    return cover


def verify_all(tree: ProtocolTree, M: IntegralMatrix | None = None, jobs: int = 1) -> ProtocolStats:
    """Run every input pair and check outputs, the leaf partition, and the
    rank bound at each 0-child.  Raises :class:`VerificationError`."""
    M = M if M is not None else tree.matrix
    if M.shape != tree.matrix.shape:
        raise VerificationError("tree was built for a different shape")
    cover = leaf_cover(tree)
    if not np.all(cover == 1):
        a, b = (int(x) for x in np.argwhere(cover != 1)[0])
        raise VerificationError(f"entry ({a},{b}) covered {cover[a, b]} times by leaves", (a, b))

    pairs = [(a, b) for a in range(M.n_rows) for b in range(M.n_cols)]

    def check(pair):
        t = run(tree, *pair)
        if t.output != M.entries[pair]:
            raise VerificationError(f"pair {pair}: output {t.output} != {M.entries[pair]}", pair)
        if any(not 0 <= x <= M.delta for x in t.payload):
            raise VerificationError(f"pair {pair}: payload outside [0, delta]", pair)
        return t

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            transcripts = list(pool.map(check, pairs))
    else:
        transcripts = [check(p) for p in pairs]

    trajectory = []
    deltas = []
    internal = list(tree.root.internal_nodes())
    for node in internal:
        pair = (node.rank, node.child0.rank)
        if 2 * pair[1] > pair[0] + 3:
            raise VerificationError(f"0-child rank {pair[1]} exceeds bound for parent rank {pair[0]}")
        trajectory.append(pair)
        deltas.append(-math.log(node.split_rect.area / node.view.area))
    return ProtocolStats(
        leaves=len(tree.leaves()),
        depth=max(len(t.bits) for t in transcripts),
        max_bits=max(t.bit_count for t in transcripts),
        root_rank=tree.root.rank,
        rank_trajectory=trajectory,
        empirical_delta=deltas,
        internal_nodes=len(internal),
    )
