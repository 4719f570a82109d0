"""Test suite for the matching cache simulator."""
