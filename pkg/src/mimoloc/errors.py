"""Exception hierarchy shared by all mimoloc modules."""


class MimolocError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateGeometry(MimolocError):
    """A sensor coincides with the evaluation point; bearings are undefined."""


class SingularGeometry(MimolocError):
    """The bearing geometry is rank deficient (e.g. all paths collinear)."""


class SingularFim(MimolocError):
    """A Fisher information matrix cannot be inverted reliably."""


class RankDeficient(MimolocError):
    """The linearized observation matrix has deficient column rank."""


class ZeroEnergy(MimolocError):
    """A waveform carries (numerically) no energy."""


class DelayOutOfRange(MimolocError):
    """A requested delay falls outside the supported window."""


class NonFiniteInput(MimolocError):
    """An input contains NaN or infinity."""


class PeakNotFound(MimolocError):
    """A correlation maximum sits on the search-window boundary."""


class BoundaryMaximum(MimolocError):
    """A grid-search optimum sits on the region edge."""


class TooFewSensors(MimolocError):
    """A symmetric constellation needs at least three members."""


class DegenerateOptimum(MimolocError):
    """The placement search failed to produce a finite objective."""


class InvalidParameter(MimolocError):
    """A scalar parameter violates its domain (sign, finiteness)."""


class ConfigError(MimolocError):
    """A scenario configuration file failed validation."""
