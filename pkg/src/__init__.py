"""Adaptive frequency sweep source package."""
