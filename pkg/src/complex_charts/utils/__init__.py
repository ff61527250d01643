"""`complex_charts.utils`.

Utility methods and functions.
"""
