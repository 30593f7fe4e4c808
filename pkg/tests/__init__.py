"""
Test suite for ramp_merge_rl.
"""
