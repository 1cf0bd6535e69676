"""Batch experiment driver."""
