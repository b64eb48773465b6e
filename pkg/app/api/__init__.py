"""Lab service routes package."""
