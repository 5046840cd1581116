"""
Result files and config files
"""
