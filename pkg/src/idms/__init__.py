"""Hierarchically managed identity registry on a deterministic simulated
ledger, with direct user-to-relying-party authentication and attribute
transfer that never contacts a third party."""

__version__ = "0.1.0"
