"""Matrix signal-flow graphs reduced by node elimination.

Nodes hold row-vector signals; branch gains are dual matrices that
multiply on the right along a path.  Eliminating an interior node n
rewires every predecessor-successor pair through gain(p->n) *
(I - selfloop(n))^-1 * gain(n->s), merging parallel branches by
addition.  Repeated elimination reduces the graph to the single
input -> output gain, an independent construction of the protocol MGFs.
"""
from __future__ import annotations

import numpy as np

from .channel import CompositeChannel
from .genfunc import DualMatrix, dual_add, dual_geo, dual_mul, dual_term
from .protocols import ProtocolParams


class GraphError(ValueError):
    """Malformed graph or illegal elimination."""


class FlowGraph:
    """Directed graph with dual-matrix branch gains and one input/output.

    Parallel branches merge on insertion, so there is at most one branch
    per ordered node pair.  The input accepts no incoming branches and
    the output no outgoing ones; interior self-loops are allowed.
    """

    def __init__(self, input_node: str, output_node: str):
        if input_node == output_node:
            raise GraphError("input and output must differ")
        self.input = input_node
        self.output = output_node
        self.nodes: set[str] = {input_node, output_node}
        self.branches: dict[tuple[str, str], DualMatrix] = {}
        self.labels: dict[tuple[str, str], str] = {}

    def add_branch(self, src: str, dst: str, gain: DualMatrix, label: str = "") -> None:
        if dst == self.input:
            raise GraphError("input node cannot receive branches")
        if src == self.output:
            raise GraphError("output node cannot emit branches")
        if src == dst and src in (self.input, self.output):
            raise GraphError("no self-loops on input or output")
        self.nodes.update((src, dst))
        key = (src, dst)
        if key in self.branches:
            self.branches[key] = dual_add(self.branches[key], gain)
            if label:
                self.labels[key] = f"{self.labels.get(key, '')} + {label}".strip(" +")
        else:
            self.branches[key] = gain
            if label:
                self.labels[key] = label

    def copy(self) -> "FlowGraph":
        g = FlowGraph(self.input, self.output)
        g.nodes = set(self.nodes)
        g.branches = dict(self.branches)
        g.labels = dict(self.labels)
        return g

    def interior_nodes(self) -> list[str]:
        return sorted(self.nodes - {self.input, self.output})

    def to_dot(self) -> str:
        """DOT-format dump for documentation; gains shown by label only."""
        lines = ["digraph msfg {", "  rankdir=LR;"]
        for node in sorted(self.nodes):
            shape = "doublecircle" if node in (self.input, self.output) else "circle"
            lines.append(f'  "{node}" [shape={shape}];')
        for (src, dst), gain in sorted(self.branches.items()):
            label = self.labels.get((src, dst), f"{gain.val.shape[0]}x{gain.val.shape[1]}")
            lines.append(f'  "{src}" -> "{dst}" [label="{label}"];')
        lines.append("}")
        return "\n".join(lines)


def eliminate_node(g: FlowGraph, n: str) -> FlowGraph:
    """Remove interior node n, rewiring paths through its self-loop closure."""
    if n not in g.nodes:
        raise GraphError(f"no node {n!r}")
    if n in (g.input, g.output):
        raise GraphError("cannot eliminate the input or output node")
    out = g.copy()
    loop = out.branches.pop((n, n), None)
    preds = [(src, gain) for (src, dst), gain in out.branches.items() if dst == n and src != n]
    succs = [(dst, gain) for (src, dst), gain in out.branches.items() if src == n and dst != n]
    for src, _ in preds:
        del out.branches[(src, n)]
        out.labels.pop((src, n), None)
    for dst, _ in succs:
        del out.branches[(n, dst)]
        out.labels.pop((n, dst), None)
    for src, g_in in preds:
        through = g_in if loop is None else dual_mul(g_in, dual_geo(loop))
        for dst, g_out in succs:
            key = (src, dst)
            gain = dual_mul(through, g_out)
            if key in out.branches:
                out.branches[key] = dual_add(out.branches[key], gain)
            else:
                out.branches[key] = gain
    out.nodes.discard(n)
    out.labels = {k: v for k, v in out.labels.items() if n not in k}
    return out


def graph_gain(g: FlowGraph) -> DualMatrix:
    """Input-to-output dual gain after eliminating all interior nodes.

    Interior nodes are removed in ascending label order for
    reproducibility; the result is elimination-order independent.
    """
    reduced = g
    for n in g.interior_nodes():
        reduced = eliminate_node(reduced, n)
    gain = reduced.branches.get((g.input, g.output))
    if gain is None:
        raise GraphError("output not reachable from input")
    return gain


def build_uncoded_graph(
    ch: CompositeChannel, p: ProtocolParams, kind: str, z: float = 1.0
) -> FlowGraph:
    """Selective-repeat ARQ state machine as a flow graph (nodes I,A,B,C,O).

    I: start of transmission.  A: the packet's own feedback arrives.
    B: retransmission of a lost packet (delivered NACK after k slots, or
    erased NACK after the T-slot timer).  C: the packet was delivered
    but its ACK was erased and the timer ran out; pointless
    retransmissions repeat every T slots until some cumulative feedback
    gets through.  O: ACK received.

    kind "tau" dresses branches with z per transmission, "delay" with z
    per slot; both reduce to the closed-form MGFs.
    """
    if kind not in ("tau", "delay"):
        raise ValueError("kind must be 'tau' or 'delay'")
    k, T, d = p.k, p.T, p.d
    Pk = np.linalg.matrix_power(ch.Pc, k - 1)
    PT = np.linalg.matrix_power(ch.Pc, T - 1)
    slot = kind == "delay"

    def zp(n: int) -> int:
        return n if slot else 0

    g = FlowGraph("I", "O")
    g.add_branch("I", "A", dual_term(Pk, k - 1 if slot else 1, z), "P^{k-1}")

    nack = dual_add(
        dual_term(ch.P10 @ Pk, zp(k - 1), z), dual_term(ch.P11 @ PT, zp(T - 1), z)
    )
    g.add_branch("A", "B", nack, "P10 P^{k-1} + P11 P^{T-1}")
    g.add_branch("B", "A", dual_term(np.eye(4), zp(1) if slot else 1, z), "retx")

    ack = dual_term(ch.P00, zp(1), z)
    run = np.eye(4)
    for j in range(d):
        ack = dual_add(ack, dual_term(ch.P01 @ run @ ch.Px0, zp(2 + j), z))
        run = run @ ch.Px1
    g.add_branch("A", "O", ack, "ACK / early recovery")

    g.add_branch("A", "C", dual_term(ch.P01 @ run, zp(1 + d), z), "P01 Px1^d")
    g.add_branch(
        "C", "C", dual_term(np.linalg.matrix_power(ch.Px1, T), T if slot else 1, z), "Px1^T"
    )
    run = np.eye(4)
    escape = None
    for j in range(T):
        term = dual_term(run @ ch.Px0, zp(j + 1) if slot else 1, z)
        escape = term if escape is None else dual_add(escape, term)
        run = run @ ch.Px1
    g.add_branch("C", "O", escape, "late recovery")
    return g
