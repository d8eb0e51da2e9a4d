"""Tests for hosadecon package"""
