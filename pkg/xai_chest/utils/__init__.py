"""
Utility modules for the xai-chest laboratory
"""
