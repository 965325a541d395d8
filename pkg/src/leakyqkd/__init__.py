"""Key rates for MDI QKD with passive, time-dependent source side-channels."""

__version__ = "0.1.0"
