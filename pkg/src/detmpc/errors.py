"""Exception hierarchy. Every error carries a module-qualified code for the CLI."""

from __future__ import annotations


class DetMPCError(Exception):
    module = "core"

    @property
    def code(self) -> str:
        return f"{self.module}.{type(self).__name__}"


# graph-core
class GraphError(DetMPCError):
    module = "graph"


class DuplicateEdge(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class NodeIdOutOfRange(GraphError):
    pass


class EmptyGraph(GraphError):
    pass


class SizeCapExceeded(GraphError):
    pass


# mpc-sim
class MPCError(DetMPCError):
    module = "mpc"


class SpaceExceeded(MPCError):
    pass


class BallTooLarge(MPCError):
    def __init__(self, node: int, words: int, space: int):
        super().__init__(f"ball of node {node} needs {words} words, machine space is {space}")
        self.node = node
        self.words = words
        self.space = space


# hash-family
class HashError(DetMPCError):
    module = "hash"


class DomainOverflow(HashError):
    pass


class FamilyTooLarge(HashError):
    pass


# derand
class DerandError(DetMPCError):
    module = "derand"


class EvaluatorInconsistent(DerandError):
    pass


class CapExceeded(DerandError):
    pass


class NoSeedMeetsBound(DerandError):
    pass


# matching / mis
class InvariantViolated(DetMPCError):
    module = "sparsify"

    def __init__(self, stage: int, node: int, detail: str = ""):
        super().__init__(f"invariant violated at stage {stage}, node {node}: {detail}")
        self.stage = stage
        self.node = node


# lowdeg
class SequenceSpaceTooLarge(DetMPCError):
    module = "lowdeg"


# list-coloring
class ColoringError(DetMPCError):
    module = "coloring"


class PaletteTooSmall(ColoringError):
    pass


class DegreeTooHigh(ColoringError):
    pass


class PaletteDeficit(ColoringError):
    def __init__(self, node: int):
        super().__init__(f"node {node} has fewer bin colors than bin neighbours")
        self.node = node


class InvalidParams(DetMPCError):
    module = "bench"
