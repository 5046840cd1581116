"""
Records of simulation scenarios, fusion events and campaign results
"""
