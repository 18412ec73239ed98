"""Exception types.

Two families matter to callers: ``ValidationError`` means the input itself is
malformed (bad schema, metric axioms violated, mismatched shapes), while
``PipelineRejection`` means well-formed input that a construction cannot
handle (rank obstruction, cardinality obstruction, non-orthogonal family).
The CLI maps them to exit codes 2 and 3.
"""


class CoarsekitError(Exception):
    pass


class ValidationError(CoarsekitError, ValueError):
    pass


class PipelineRejection(CoarsekitError, RuntimeError):
    pass


class DenseLimitError(PipelineRejection):
    pass


class NonOrthogonalFamily(PipelineRejection):
    def __init__(self, i, j, kind):
        super().__init__(f"operators {i} and {j} are not orthogonal ({kind} != 0)")
        self.pair = (i, j)
        self.kind = kind


class RecoveryError(PipelineRejection):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ExtractionError(PipelineRejection):
    def __init__(self, message, point=None, index=None):
        super().__init__(message)
        self.point = point
        self.index = index


class CoveringError(PipelineRejection):
    def __init__(self, message, obstruction=None):
        super().__init__(message)
        self.obstruction = obstruction or {}
