"""
Configuración de Ordinal Embedding Tool
"""
