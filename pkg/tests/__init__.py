"""
Test suite for ETL Pipeline MVP - Phase A
"""