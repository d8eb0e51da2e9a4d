"""Pipeline stages for hosadecon"""
