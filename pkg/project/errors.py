class SatMvsError(Exception):
    """Base exception for all library errors"""
