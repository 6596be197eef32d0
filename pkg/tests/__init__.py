"""Unit tests package for notification service."""
