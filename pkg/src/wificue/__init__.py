"""Wi-Fi access-point risk assessment: scan ingest, rule flags, recommendations."""

__version__ = "0.1.0"
