"""Checked-in experiment configurations."""
