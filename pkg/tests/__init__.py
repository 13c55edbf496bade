"""Test package for corridor_nav."""
