"""Exception types shared across the package."""


class DegenerateGeometryError(ValueError):
    """Too few or (near-)collinear points to define a plane."""


class BehindCameraError(ValueError):
    """A point with non-positive depth was projected."""


class FootprintUndefinedError(ValueError):
    """A zone corner lands behind the RGB camera."""


class UnobservableError(ValueError):
    """The plane configuration cannot constrain all six extrinsic degrees of freedom."""


class ConvergenceError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PatchUndefinedError(ValueError):
    """A patch rectangle does not intersect the feature map."""


class NoValidPixelsError(ValueError):
    """No pixel carries valid ground truth."""


class TrainingDivergedError(RuntimeError):
    def __init__(self, message, step, parameter_norms):
        super().__init__(message)
        self.step = step
        self.parameter_norms = parameter_norms
