"""Exception types shared across the package.

All domain errors derive from GaitMatchError so the CLI can map them to the
data-error exit code in one place.
"""


class GaitMatchError(Exception):
    """Base class for domain errors raised by this package."""


class DegenerateFrame(GaitMatchError):
    """Frame cannot be normalized: zero torso or an untrusted anchor joint."""


class UnimputableJoint(GaitMatchError):
    """A joint is invalid in every frame, so interpolation has no support."""


class EmptySequence(GaitMatchError):
    """An operation received a zero-length sequence."""


class EmptyGallery(GaitMatchError):
    """Matching was requested against an empty gallery."""


class MissingGroundTruth(GaitMatchError):
    """A query identity does not appear in the gallery at all."""


class DataFormatError(GaitMatchError):
    """A dataset file is unreadable or yields no usable records."""
