"""API route tests."""
