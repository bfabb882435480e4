"""Shipped configuration documents."""
