"""Command-line driver tests."""
