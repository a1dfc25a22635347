"""Exception hierarchy shared by all stages."""


class Refill3DError(Exception):
    """Base class for errors raised by refill3d."""


class DimensionMismatchError(Refill3DError, ValueError):
    pass


class InvalidDepthError(Refill3DError, ValueError):
    pass


class BehindCameraError(Refill3DError, ValueError):
    """A point lies at or behind the camera plane (z <= 1e-6)."""


class OutOfBoundsError(Refill3DError, IndexError):
    """A sample coordinate falls outside [0, W-1] x [0, H-1]."""


class EmptyOverlapError(Refill3DError):
    """Too few pixels are both known and validly reprojected."""


class AlignmentFailedError(Refill3DError):
    """The 3D alignment could not start (no overlap at the coarsest level)."""


class EmptyRingError(Refill3DError):
    """The band around the hole contains no observable pixels."""


class ImageFormatError(Refill3DError, ValueError):
    """A file could not be decoded or has an unsupported layout."""
