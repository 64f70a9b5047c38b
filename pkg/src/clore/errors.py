"""Exception hierarchy shared across the package."""


class CloreError(Exception):
    """Base class for every rejection raised by this package."""


class ShapeMismatchError(CloreError):
    """Incompatible operand shapes, reported with the offending node id."""

    def __init__(self, node_id, message):
        self.node_id = node_id
        super().__init__(f"node {node_id}: {message}")


class NonFiniteError(CloreError):
    """A forward pass produced NaN or infinity at the given node."""

    def __init__(self, node_id, op_name):
        self.node_id = node_id
        self.op_name = op_name
        super().__init__(f"non-finite value at node {node_id} ({op_name})")


class TapeStateError(CloreError):
    """Tape used out of order, e.g. backward before forward."""


class TaskFormatError(CloreError):
    """A task or manifest file violates the documented schema."""


class CheckpointError(CloreError):
    """A checkpoint file is corrupt, truncated, or incompatible."""


class TrainingDivergedError(CloreError):
    """Loss became non-finite during training."""

    def __init__(self, epoch, step, detail=""):
        self.epoch = epoch
        self.step = step
        suffix = f": {detail}" if detail else ""
        super().__init__(f"training diverged at epoch {epoch}, step {step}{suffix}")
