"""Exception types raised across the ghost2 pipeline."""


class Ghost2Error(Exception):
    """Base class for every error raised by this package."""


# --- ingestion -------------------------------------------------------------

class DatasetError(Ghost2Error):
    pass


class MissingColumn(DatasetError):
    def __init__(self, column):
        super().__init__(f"missing required column {column!r}")
        self.column = column


class NonNumericCell(DatasetError):
    def __init__(self, row, col, value=None):
        super().__init__(f"non-numeric cell at row {row}, column {col!r}: {value!r}")
        self.row = row
        self.col = col


class BadLabel(DatasetError):
    def __init__(self, row, value=None):
        super().__init__(f"label at row {row} is not 0 or 1: {value!r}")
        self.row = row


class EmptyDataset(DatasetError):
    pass


class TooFewRows(DatasetError):
    pass


# --- geometry --------------------------------------------------------------

class EmptyPointSet(Ghost2Error):
    pass


class NotEnoughNeighbors(Ghost2Error):
    def __init__(self, k, available):
        super().__init__(f"asked for {k} neighbours but only {available} eligible points exist")
        self.k = k
        self.available = available


# --- treatments ------------------------------------------------------------

class TreatmentError(Ghost2Error):
    pass


class TooFewMinority(TreatmentError):
    pass


class SingleClass(TreatmentError):
    pass


class PlanSyntaxError(TreatmentError):
    pass


# --- learners --------------------------------------------------------------

class LearnerError(Ghost2Error):
    pass


class NonFiniteLoss(LearnerError):
    def __init__(self, epoch, loss):
        super().__init__(f"loss became non-finite ({loss}) at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


class WidthMismatch(LearnerError):
    def __init__(self, expected, got):
        super().__init__(f"model expects {expected} features, got {got}")
        self.expected = expected
        self.got = got


class UnsupportedModel(LearnerError):
    pass


class ModelFormatError(LearnerError):
    pass


# --- evaluation / landscape -------------------------------------------------

class LengthMismatch(Ghost2Error):
    pass


class GridTooSmall(Ghost2Error):
    pass


class TooFewLeaves(Ghost2Error):
    pass
