"""MARS with gradient-based sufficient dimension reduction."""
