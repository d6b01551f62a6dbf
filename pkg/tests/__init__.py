"""
Tests para Ordinal Embedding Tool
"""
