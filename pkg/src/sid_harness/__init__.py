"""Streaming evaluation harness for barge-in (interruption) detection in
full-duplex spoken dialogue systems."""

__version__ = "0.1.0"
