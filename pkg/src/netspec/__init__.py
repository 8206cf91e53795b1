"""Crowd-sourced 6G use-case knowledge base with RAG-based network specification generation."""

__version__ = "0.1.0"
