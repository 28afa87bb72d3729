"""Class hierarchy with corpus frequencies, information content and Lin similarity.

Node probabilities follow the Resnik estimate: the probability of a class is
its own corpus frequency plus the frequencies of everything it subsumes,
normalised by the total mass of the tree.  Information content is
``-log p(C)`` (natural log), so it is zero at the root and grows towards the
leaves.
"""

from __future__ import annotations

import json
import math
import operator
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping


class MalformedTaxonomy(ValueError):
    pass


class UnknownClass(KeyError):
    pass


@dataclass(frozen=True)
class ClassNode:
    id: int
    name: str
    parent: int | None
    corpus_frequency: float


class Taxonomy:
    """Immutable rooted tree of classes.

    Build one with :meth:`from_nodes` or :func:`load_taxonomy`.
    """

    def __init__(self, nodes: Iterable[ClassNode]):
        nodes = sorted(nodes, key=lambda n: n.id)
        if not nodes:
            raise MalformedTaxonomy("taxonomy has no nodes")
        ids = [n.id for n in nodes]
        if ids != list(range(len(nodes))):
            if len(set(ids)) != len(ids):
                raise MalformedTaxonomy("duplicate node ids")
            raise MalformedTaxonomy("node ids must be dense and 0-based")
        names = [n.name for n in nodes]
        if len(set(names)) != len(names):
            raise MalformedTaxonomy("duplicate node names")

        self.nodes: tuple[ClassNode, ...] = tuple(nodes)
        self._by_name = {n.name: n.id for n in nodes}

        roots = [n.id for n in nodes if n.parent is None]
        if len(roots) != 1:
            raise MalformedTaxonomy(f"expected exactly one root, found {len(roots)}")
        self.root = roots[0]

        self._children: list[list[int]] = [[] for _ in nodes]
        for n in nodes:
            if n.corpus_frequency < 0 or not math.isfinite(n.corpus_frequency):
                raise MalformedTaxonomy(f"node {n.name!r} has invalid frequency")
            if n.parent is not None:
                if not 0 <= n.parent < len(nodes):
                    raise MalformedTaxonomy(f"node {n.name!r} has dangling parent {n.parent}")
                self._children[n.parent].append(n.id)

        # depth via BFS from the root; nodes not reached sit on a cycle
        depth = [-1] * len(nodes)
        depth[self.root] = 0
        order = [self.root]
        for nid in order:
            for c in self._children[nid]:
                depth[c] = depth[nid] + 1
                order.append(c)
        if len(order) != len(nodes):
            raise MalformedTaxonomy("parent links contain a cycle")
        self.depth: tuple[int, ...] = tuple(depth)

        mass = [n.corpus_frequency for n in nodes]
        for nid in reversed(order):
            parent = nodes[nid].parent
            if parent is not None:
                mass[parent] += mass[nid]
        total = mass[self.root]
        if total <= 0:
            raise MalformedTaxonomy("total frequency mass is zero")
        if min(mass) <= 0:
            empty = nodes[mass.index(min(mass))].name
            raise MalformedTaxonomy(f"node {empty!r} carries no frequency mass")
        self.probability: tuple[float, ...] = tuple(m / total for m in mass)
        self.information_content: tuple[float, ...] = tuple(
            -math.log(p) for p in self.probability
        )

    @classmethod
    def from_nodes(cls, records: Iterable[Mapping]) -> "Taxonomy":
        """Build from dict records ``{id, name, parent_id?, frequency}``."""
        nodes = []
        for r in records:
            try:
                nodes.append(
                    ClassNode(
                        id=int(r["id"]),
                        name=str(r["name"]),
                        parent=None if r.get("parent_id") is None else int(r["parent_id"]),
                        corpus_frequency=float(r["frequency"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as e:
                raise MalformedTaxonomy(f"bad node record {r!r}: {e}") from e
        return cls(nodes)

    def to_records(self) -> list[dict]:
        out = []
        for n in self.nodes:
            rec = {"id": n.id, "name": n.name, "frequency": n.corpus_frequency}
            if n.parent is not None:
                rec["parent_id"] = n.parent
            out.append(rec)
        return out

    def __len__(self):
        return len(self.nodes)

    def _check(self, nid: int) -> int:
        try:
            nid = operator.index(nid)
        except TypeError:
            raise UnknownClass(nid) from None
        if not 0 <= nid < len(self.nodes):
            raise UnknownClass(nid)
        return nid

    def id_of(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownClass(name) from None

    def name_of(self, nid: int) -> str:
        return self.nodes[self._check(nid)].name

    def parent(self, nid: int) -> int | None:
        return self.nodes[self._check(nid)].parent

    def children(self, nid: int) -> list[int]:
        return list(self._children[self._check(nid)])

    def ancestors(self, nid: int) -> list[int]:
        """Path from ``nid`` (inclusive) up to the root."""
        path = [self._check(nid)]
        while self.nodes[path[-1]].parent is not None:
            path.append(self.nodes[path[-1]].parent)
        return path

    def leaves(self) -> list[int]:
        return [n.id for n in self.nodes if not self._children[n.id]]

    def siblings(self, nid: int) -> list[int]:
        p = self.parent(nid)
        if p is None:
            return []
        return [c for c in self._children[p] if c != nid]

    def ic(self, nid: int) -> float:
        return self.information_content[self._check(nid)]


def load_taxonomy(source) -> Taxonomy:
    """Load a taxonomy document (path or already-parsed dict)."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as e:
                raise MalformedTaxonomy(f"{source}: line {e.lineno}: {e.msg}") from e
    else:
        doc = source
    if not isinstance(doc, Mapping) or not isinstance(doc.get("nodes"), list):
        raise MalformedTaxonomy("taxonomy document needs a 'nodes' list")
    return Taxonomy.from_nodes(doc["nodes"])


def lowest_common_subsumer(t: Taxonomy, a: int, b: int) -> int:
    anc_a = set(t.ancestors(a))
    for nid in t.ancestors(b):
        if nid in anc_a:
            return nid
    raise AssertionError("tree has no common ancestor")  # unreachable for a rooted tree


def lin_similarity(t: Taxonomy, a: int, b: int) -> float:
    if t._check(a) == t._check(b):
        return 1.0
    denom = t.ic(a) + t.ic(b)
    if denom == 0.0:
        return 0.0
    return 2.0 * t.ic(lowest_common_subsumer(t, a, b)) / denom


def is_ancestor(t: Taxonomy, anc: int, desc: int) -> bool:
    t._check(anc)
    return anc in t.ancestors(desc)
