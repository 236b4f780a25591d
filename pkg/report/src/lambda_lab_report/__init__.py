"""Renders the laboratory's delimited artifacts into figures and a page.

Consumes only the documented output formats (flow CSV + summary JSON,
scan report JSON, variation CSV); never recomputes fitted quantities.
"""

from .readers import FormatError, load_flow, load_scan, load_variations

__all__ = ["FormatError", "load_flow", "load_scan", "load_variations"]
