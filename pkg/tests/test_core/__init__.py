"""Core functionality tests."""
