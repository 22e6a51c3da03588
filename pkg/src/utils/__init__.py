"""
Utility functions for base-station pattern analysis.
"""
