"""Unit tests for the Andy AI Bot."""
