"""Bundled example measurement setups (JSON)."""
