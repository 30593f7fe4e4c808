"""
Experiment scripts for ramp_merge_rl.
"""
