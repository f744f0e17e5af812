"""Labeled out-tree skeleton: topology rules, label rules, JSON interchange.

Skeletons are immutable values; ``attach`` returns a new skeleton. The
label NONE is reserved for the auxiliary path cost and is never stored.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import AttachmentError
from .labels import Label, parse_label

Edge = tuple[int, int]  # (parent, child)


class LabeledSkeleton:
    """Directed out-tree over superpoint node ids with one label per edge."""

    __slots__ = ("base", "_parent", "_labels", "_succ")

    def __init__(self, base: int, _parent=None, _labels=None, _succ=None):
        self.base = base
        # child -> parent
        self._parent: dict[int, int] = _parent if _parent is not None else {}
        # (parent, child) -> Label
        self._labels: dict[Edge, Label] = _labels if _labels is not None else {}
        # node -> tuple of (child, label) for its outgoing edges
        self._succ: dict[int, tuple] = _succ if _succ is not None else {}

    # -- read access ------------------------------------------------------
    @property
    def nodes(self) -> set[int]:
        used = set(self._parent)
        used.add(self.base)
        return used

    @property
    def edge_labels(self) -> dict[Edge, Label]:
        return dict(self._labels)

    @property
    def num_edges(self) -> int:
        return len(self._labels)

    def has_node(self, node: int) -> bool:
        return node == self.base or node in self._parent

    def edges(self):
        return self._labels.keys()

    def label_of(self, edge: Edge) -> Label:
        return self._labels[edge]

    def parent_edge(self, node: int) -> Edge | None:
        """The unique edge into ``node``, or None for the base."""
        parent = self._parent.get(node)
        if parent is None:
            return None
        return (parent, node)

    def children_of(self, node: int) -> tuple:
        return self._succ.get(node, ())

    def __eq__(self, other):
        return (isinstance(other, LabeledSkeleton)
                and self.base == other.base and self._labels == other._labels)

    def __hash__(self):
        return hash((self.base, frozenset(self._labels.items())))

    # -- label rules ------------------------------------------------------
    def check_label_progression(self, e_new: Edge, l_new: Label) -> bool:
        """Predecessor label order must not exceed the new label's order."""
        if l_new is Label.NONE:
            raise ValueError("Label.NONE is never assigned during growth")
        pred = self.parent_edge(e_new[0])
        if pred is None:
            return True
        return self._labels[pred].order <= l_new.order

    def check_label_linearity(self, e_new: Edge, l_new: Label) -> bool:
        """No predecessor edge may end up with two same-label successors
        while itself carrying that label (prevents same-label Y junctions)."""
        pred = self.parent_edge(e_new[0])
        if pred is None or self._labels[pred] is not l_new:
            return True
        return not any(lab is l_new for _, lab in self.children_of(e_new[0]))

    def check_trunk_support_split(self, e_new: Edge, l_new: Label) -> bool:
        """Successors of a Trunk edge are either all Trunk, or all non-Trunk
        with at most two Supports (the support split sits atop the trunk)."""
        pred = self.parent_edge(e_new[0])
        if pred is None or self._labels[pred] is not Label.TRUNK:
            return True
        succ_labels = [lab for _, lab in self.children_of(e_new[0])]
        combined = succ_labels + [l_new]
        if all(lab is Label.TRUNK for lab in combined):
            return True
        if any(lab is Label.TRUNK for lab in combined):
            return False
        return sum(lab is Label.SUPPORT for lab in combined) <= 2

    def check_all(self, e_new: Edge, l_new: Label) -> str | None:
        """Name of the first violated rule, or None if the attach is legal."""
        parent, child = e_new
        if parent == child:
            return "out-tree"
        if not self.has_node(parent):
            return "out-tree"
        if self.has_node(child):
            return "out-tree"
        if not self.check_label_progression(e_new, l_new):
            return "label-progression"
        if not self.check_label_linearity(e_new, l_new):
            return "label-linearity"
        if not self.check_trunk_support_split(e_new, l_new):
            return "trunk-support-split"
        return None

    # -- growth -----------------------------------------------------------
    def attach(self, e_new: Edge, l_new: Label) -> "LabeledSkeleton":
        """New skeleton with (edge, label) added; raises on any violation."""
        if l_new is Label.NONE:
            raise AttachmentError("label", "Label.NONE cannot be attached")
        rule = self.check_all(e_new, l_new)
        if rule is not None:
            return self._reject(rule, e_new, l_new)
        parent, child = e_new
        new_parent = dict(self._parent)
        new_parent[child] = parent
        new_labels = dict(self._labels)
        new_labels[e_new] = l_new
        new_succ = dict(self._succ)
        new_succ[parent] = new_succ.get(parent, ()) + ((child, l_new),)
        return LabeledSkeleton(self.base, new_parent, new_labels, new_succ)

    def _reject(self, rule, e_new, l_new):
        raise AttachmentError(
            rule, f"cannot attach edge {e_new} with label {l_new}")

    # -- validation -------------------------------------------------------
    def topology_violations(self) -> list[str]:
        return topology_violations(
            self.base, [(p, c) for (p, c) in self._labels])

    def label_violations(self) -> list[str]:
        """Check the three label rules over the whole skeleton."""
        out = []
        for (parent, child), label in self._labels.items():
            pred = self.parent_edge(parent)
            if pred is not None:
                plab = self._labels[pred]
                if plab.order > label.order:
                    out.append(
                        f"label-progression: {pred} {plab} -> "
                        f"({parent},{child}) {label}")
        for node, succ in self._succ.items():
            pred = self.parent_edge(node)
            if pred is None:
                continue
            plab = self._labels[pred]
            same = [c for c, lab in succ if lab is plab]
            if len(same) >= 2:
                out.append(f"label-linearity: node {node} label {plab}")
            if plab is Label.TRUNK:
                labs = [lab for _, lab in succ]
                non_trunk = [lab for lab in labs if lab is not Label.TRUNK]
                if non_trunk and any(lab is Label.TRUNK for lab in labs):
                    out.append(f"trunk-support-split: node {node} mixed")
                if sum(lab is Label.SUPPORT for lab in labs) > 2:
                    out.append(f"trunk-support-split: node {node} >2 supports")
        return out


def topology_violations(base: int, edges: list[Edge]) -> list[str]:
    """Out-tree violations of a raw edge list: duplicates, multi-parent,
    edges into the base, cycles, disconnection."""
    out = []
    seen = set()
    parent_of: dict[int, int] = {}
    children: dict[int, list[int]] = {}
    for parent, child in edges:
        if (parent, child) in seen:
            out.append(f"duplicate-edge: ({parent},{child})")
            continue
        seen.add((parent, child))
        if child == base:
            out.append(f"edge-into-base: ({parent},{child})")
        if child in parent_of:
            out.append(f"multi-parent: node {child}")
        else:
            parent_of[child] = parent
        children.setdefault(parent, []).append(child)
    # BFS from base; anything unreached is disconnected or on a cycle.
    reached = {base}
    frontier = [base]
    while frontier:
        node = frontier.pop()
        for child in children.get(node, ()):
            if child not in reached:
                reached.add(child)
                frontier.append(child)
    unreached = ({p for p, _ in seen} | {c for _, c in seen}) - reached
    for node in sorted(unreached):
        if node in parent_of and _on_cycle(node, parent_of):
            out.append(f"cycle: node {node}")
        else:
            out.append(f"disconnected: node {node}")
    return out


def _on_cycle(node: int, parent_of: dict[int, int]) -> bool:
    slow = fast = node
    while fast in parent_of and parent_of[fast] in parent_of:
        slow = parent_of[slow]
        fast = parent_of[parent_of[fast]]
        if slow == fast:
            return True
    return False


# -- JSON interchange -----------------------------------------------------

def skeleton_to_dict(skeleton: LabeledSkeleton, positions) -> dict:
    """Canonical skeleton JSON: {base, nodes:[{id,pos}], edges:[...]}.

    ``positions`` maps node id to a 3-sequence.
    """
    nodes = sorted(skeleton.nodes)
    return {
        "base": skeleton.base,
        "nodes": [{"id": nid, "pos": [float(x) for x in positions[nid]]}
                  for nid in nodes],
        "edges": [{"parent": p, "child": c, "label": str(lab)}
                  for (p, c), lab in sorted(skeleton.edge_labels.items())],
    }


def skeleton_from_dict(doc: dict) -> tuple[LabeledSkeleton, dict]:
    """Parse skeleton JSON; returns (skeleton, node positions).

    Raises ValueError on topology violations in the document.
    """
    base = doc["base"]
    positions = {n["id"]: tuple(float(x) for x in n["pos"])
                 for n in doc["nodes"]}
    raw_edges = [(e["parent"], e["child"]) for e in doc["edges"]]
    violations = topology_violations(base, raw_edges)
    if violations:
        raise ValueError("invalid skeleton document: " + "; ".join(violations))
    skeleton = LabeledSkeleton(base)
    labels = {(e["parent"], e["child"]): parse_label(e["label"])
              for e in doc["edges"]}
    # Attach in BFS order from the base so every parent exists first.
    children: dict[int, list[int]] = {}
    for parent, child in raw_edges:
        children.setdefault(parent, []).append(child)
    queue = [base]
    while queue:
        node = queue.pop(0)
        for child in sorted(children.get(node, ())):
            skeleton = skeleton.attach((node, child), labels[(node, child)])
            queue.append(child)
    return skeleton, positions


def save_skeleton(skeleton: LabeledSkeleton, positions,
                  path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(skeleton_to_dict(skeleton, positions), fh, indent=1,
                  sort_keys=True)
        fh.write("\n")


def load_skeleton(path: str | Path) -> tuple[LabeledSkeleton, dict]:
    with open(path) as fh:
        return skeleton_from_dict(json.load(fh))
