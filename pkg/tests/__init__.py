"""
Test package for xai-chest
"""
