"""
Utilidades de Ordinal Embedding Tool
"""
