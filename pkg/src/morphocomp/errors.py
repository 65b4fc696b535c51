class MorphocompError(Exception):
    """Root of the package's exception hierarchy."""
