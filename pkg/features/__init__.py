"""
File: features/__init__.py
Location: aerobatic_rl/features/__init__.py
Purpose: Reproduction surface - evaluation suites, checkpoints, plot export, hyper-parameter search
"""
