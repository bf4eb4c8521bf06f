"""Contingency-table statistics and p-value based permission ranking."""
