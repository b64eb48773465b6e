"""Test suite for lplab."""
