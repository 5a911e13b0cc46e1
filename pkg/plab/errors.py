class PlabError(Exception):
    """Base class for every error raised by the lab."""


class GridError(PlabError, ValueError):
    pass


class GridMismatchError(PlabError, ValueError):
    pass


class PartitionError(PlabError, ValueError):
    pass


class BlockRangeError(PlabError, ValueError):
    pass


class DegenerateBlockError(PlabError, ValueError):
    pass


class HomogeneousMeanError(PlabError, ValueError):
    pass


class NormParameterError(PlabError, ValueError):
    pass


class DivergenceError(PlabError, ValueError):
    pass


class ConsistencyError(PlabError, ValueError):
    pass


class AxisymmetryError(PlabError, ValueError):
    pass


class SupportError(PlabError, ValueError):
    pass


class DilationError(PlabError, ValueError):
    pass


class AdmissibilityError(PlabError, ValueError):
    pass


class HistoryMismatchError(PlabError, ValueError):
    pass


class SnapshotFormatError(PlabError, ValueError):
    pass


class UnknownExperimentError(PlabError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class CFLViolation(PlabError, RuntimeError):
    def __init__(self, step: int, cfl: float, cfl_max: float, trajectory=None):
        self.step = step
        self.cfl = cfl
        self.cfl_max = cfl_max
        self.trajectory = trajectory
        super().__init__(
            f"CFL number {cfl:.4g} exceeds cfl_max={cfl_max:.4g} at step {step}"
        )
