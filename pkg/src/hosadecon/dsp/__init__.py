"""Signal processing for hosadecon"""
