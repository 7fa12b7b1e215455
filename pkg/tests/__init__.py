"""Tests for the adaptive-rff package."""
