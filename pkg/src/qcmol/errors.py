class QcmolError(ValueError):
    pass


class InvalidPolicyError(QcmolError):
    pass


class InvalidGridError(QcmolError):
    pass


class UnmappableOffsetError(QcmolError):
    def __init__(self, row: int, layer: int, delta: int):
        super().__init__(
            f"CNOT offset {delta} at (row {row}, layer {layer}) has no atom")
        self.row = row
        self.layer = layer
        self.delta = delta


class ValenceError(QcmolError):
    pass


class DisconnectedGraphError(QcmolError):
    pass


class CoincidentAtomsError(QcmolError):
    pass


class AnnotationError(QcmolError):
    pass


class DegenerateDataError(QcmolError):
    pass


class ShapeMismatchError(QcmolError):
    pass


class DatasetFormatError(QcmolError):
    pass


class ConfigurationError(QcmolError):
    pass
