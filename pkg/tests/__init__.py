"""Tests for the landmark re-ranking package."""
