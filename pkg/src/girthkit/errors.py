"""Exception hierarchy shared by all girthkit modules."""


class GirthkitError(Exception):
    """Base class for all girthkit domain errors."""


class ParseError(GirthkitError):
    """Malformed mesh or cloud file."""


class IoError(GirthkitError):
    """Filesystem failure while reading or writing an artifact."""


class EmptyMesh(GirthkitError):
    """Mesh with zero triangles where a non-empty one is required."""


class InvalidParam(GirthkitError):
    """Parameter outside its documented range."""


class NotOrganized(GirthkitError):
    """Grid-based filter applied to an unorganized point cloud."""


class InsufficientPoints(GirthkitError):
    """Too few points to carry out the requested reconstruction."""


class NoSection(GirthkitError):
    """Probe plane does not intersect the mesh (fewer than 3 ray hits)."""


class InvalidCapture(GirthkitError):
    """Marker capture without the three visible orthogonal faces."""


class NonConvergent(GirthkitError):
    """Iterative fit hit its iteration cap with a residual above tolerance."""


class DegenerateConfiguration(GirthkitError):
    """Point set too degenerate (collinear/coincident) for a rigid fit."""


class NoConsensus(GirthkitError):
    """RANSAC could not find a consensus set of at least 3 correspondences."""


class InsufficientCorrespondence(GirthkitError):
    """A camera shares too few valid marker positions to be aligned."""


class UnknownCamera(GirthkitError):
    """Cloud references a camera id absent from the rig."""


class UnknownPreset(GirthkitError):
    """Unrecognized rig preset name."""


class UnknownModel(GirthkitError):
    """Model id not present in the data store."""


class UnknownPatient(GirthkitError):
    """Patient id not present in the session store."""


class UnknownSession(GirthkitError):
    """Session id not present for the given patient."""
