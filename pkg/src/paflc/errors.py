"""Exception hierarchy shared by every module."""


class PaflcError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PaflcError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ShapeMismatchError(DomainError):
    """Two label tensors that must share a grid or channel count do not."""


class AnnotationError(PaflcError):
    """Base class for annotation ingestion failures."""


class AnnotationParseError(AnnotationError):
    """The annotation file is not well-formed JSON."""

    def __init__(self, path, offset, msg):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{self.path}: offset {offset}: {msg}")


class AnnotationValidationError(AnnotationError):
    """A record parsed but violates the schema."""

    def __init__(self, msg, annotation_ids=()):
        self.annotation_ids = list(annotation_ids)
        if self.annotation_ids:
            msg = f"{msg} (annotation ids: {', '.join(map(str, self.annotation_ids))})"
        super().__init__(msg)


class UnsupportedEncodingError(AnnotationError):
    """Segmentation encoding this package does not read (compressed RLE)."""


class TensorFormatError(PaflcError, IOError):
    """A tensor file is malformed, truncated, or disagrees with its declared layout."""

    def __init__(self, path, msg, offset=None):
        self.path = str(path)
        self.offset = offset
        where = f" at byte {offset}" if offset is not None else ""
        super().__init__(f"{self.path}{where}: {msg}")
