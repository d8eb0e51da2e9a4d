"""Core package for hosadecon"""
