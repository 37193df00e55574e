"""Reverse-mode differentiation over an explicitly recorded operation tape.

Nodes are appended in evaluation order, which is already a topological order
of the graph, so the backward pass is a single reverse sweep that visits each
node exactly once. Only the operations needed by the selection / encoder /
classifier / decoder / reconstruction graph are provided; this is not a
general-purpose autodiff system.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import numerics


class Node:
    """One recorded value: forward result plus the closure that maps the
    incoming gradient to per-parent gradient contributions."""

    __slots__ = ("value", "grad", "_parents", "_backward", "_tape")

    def __init__(self, value, parents, backward, tape):
        self.value: np.ndarray = value
        self.grad: np.ndarray | None = None
        self._parents: tuple["Node", ...] = parents
        self._backward: Callable | None = backward
        self._tape: "Tape" = tape

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def __repr__(self) -> str:
        kind = "leaf" if self.is_leaf else "op"
        return f"Node({kind}, shape={self.value.shape})"


class Tape:
    """Recorded primitive operations with forward values and backward closures."""

    def __init__(self):
        self._nodes: list[Node] = []

    def leaf(self, value) -> Node:
        arr = np.asarray(value, dtype=np.float64)
        node = Node(arr, (), None, self)
        self._nodes.append(node)
        return node

    def _record(self, value, parents: tuple[Node, ...], backward: Callable) -> Node:
        for p in parents:
            if p._tape is not self:
                raise ValueError("operand was recorded on a different tape")
        node = Node(np.asarray(value, dtype=np.float64), parents, backward, self)
        self._nodes.append(node)
        return node

    def backward(self, loss: Node) -> None:
        """Populate .grad on every node reachable from `loss`."""
        if loss._tape is not self:
            raise ValueError("loss node was not recorded on this tape")
        if loss.value.size != 1:
            raise ValueError(f"backward target must be scalar, got shape {loss.value.shape}")
        for node in self._nodes:
            node.grad = None
        loss.grad = np.ones_like(loss.value)
        for node in reversed(self._nodes):
            if node.grad is None or node._backward is None:
                continue
            for parent, contrib in zip(node._parents, node._backward(node.grad)):
                if contrib is None:
                    continue
                parent.grad = contrib if parent.grad is None else parent.grad + contrib


def grad(tape: Tape, loss: Node) -> dict[Node, np.ndarray]:
    """Gradients of a recorded scalar with respect to every leaf on the tape.

    Leaves that do not influence the loss get zero gradients.
    """
    tape.backward(loss)
    return {
        node: (node.grad if node.grad is not None else np.zeros_like(node.value))
        for node in tape._nodes
        if node.is_leaf
    }


def _same_shape(a: Node, b: Node, op: str) -> None:
    if a.value.shape != b.value.shape:
        raise numerics.DimensionError(
            f"{op} needs matching shapes, got {a.value.shape} and {b.value.shape}"
        )


def matmul(a: Node, b: Node) -> Node:
    out = numerics.matmul(a.value, b.value)
    av, bv = a.value, b.value
    return a._tape._record(out, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a: Node) -> Node:
    return a._tape._record(a.value.T, (a,), lambda g: (g.T,))


def add(a: Node, b: Node) -> Node:
    _same_shape(a, b, "add")
    return a._tape._record(a.value + b.value, (a, b), lambda g: (g, g))


def sub(a: Node, b: Node) -> Node:
    _same_shape(a, b, "sub")
    return a._tape._record(a.value - b.value, (a, b), lambda g: (g, -g))


def mul(a: Node, b: Node) -> Node:
    _same_shape(a, b, "mul")
    av, bv = a.value, b.value
    return a._tape._record(av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(a: Node, c: float) -> Node:
    c = float(c)
    return a._tape._record(a.value * c, (a,), lambda g: (g * c,))


def add_row(a: Node, row: Node) -> Node:
    """Broadcast-add a length-m row vector to every row of an n-by-m matrix."""
    if a.value.ndim != 2 or row.value.shape != (a.value.shape[1],):
        raise numerics.DimensionError(
            f"add_row needs (n, m) and (m,), got {a.value.shape} and {row.value.shape}"
        )
    return a._tape._record(a.value + row.value, (a, row), lambda g: (g, g.sum(axis=0)))


def leaky_relu(a: Node, slope: float) -> Node:
    out = numerics.leaky_relu(a.value, slope)
    gate = np.where(a.value >= 0.0, 1.0, slope)
    return a._tape._record(out, (a,), lambda g: (g * gate,))


def tanh(a: Node) -> Node:
    t = np.tanh(a.value)
    return a._tape._record(t, (a,), lambda g: (g * (1.0 - t * t),))


def log(a: Node) -> Node:
    av = a.value
    return a._tape._record(np.log(av), (a,), lambda g: (g / av,))


def clip_min(a: Node, floor: float) -> Node:
    """max(a, floor); gradient passes only where a exceeds the floor."""
    gate = a.value > floor
    return a._tape._record(np.maximum(a.value, floor), (a,), lambda g: (g * gate,))


def square(a: Node) -> Node:
    av = a.value
    return a._tape._record(av * av, (a,), lambda g: (2.0 * g * av,))


def softmax(a: Node, axis: int) -> Node:
    p = numerics.softmax(a.value, axis=axis)

    def backward(g):
        return (p * (g - np.sum(g * p, axis=axis, keepdims=True)),)

    return a._tape._record(p, (a,), backward)


def pick(a: Node, indices: Sequence[int]) -> Node:
    """Select a[i, indices[i]] for each row i of a 2-D node."""
    idx = np.asarray(indices, dtype=np.intp)
    if a.value.ndim != 2 or idx.shape != (a.value.shape[0],):
        raise numerics.DimensionError(
            f"pick needs (n, m) values and n indices, got {a.value.shape} and {idx.shape}"
        )
    if idx.size and (idx.min() < 0 or idx.max() >= a.value.shape[1]):
        raise IndexError(f"pick index out of range for {a.value.shape[1]} columns")
    rows = np.arange(a.value.shape[0])
    shape = a.value.shape

    def backward(g):
        out = np.zeros(shape)
        out[rows, idx] = g
        return (out,)

    return a._tape._record(a.value[rows, idx], (a,), backward)


def sum_all(a: Node) -> Node:
    shape = a.value.shape
    return a._tape._record(np.sum(a.value), (a,), lambda g: (np.broadcast_to(g, shape),))
