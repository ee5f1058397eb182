"""Cooperative HARQ outage simulator for multi-source multi-relay networks."""
