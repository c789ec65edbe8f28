"""mmir test suite"""
