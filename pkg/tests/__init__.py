"""Tests for maxsamples."""
