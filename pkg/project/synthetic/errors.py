from project.errors import SatMvsError


class GenerationError(SatMvsError):
    """Error when a synthetic RPC cannot reproduce its projector"""
