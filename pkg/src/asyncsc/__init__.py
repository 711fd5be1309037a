"""Asynchronous sidechain protocol toolkit."""
