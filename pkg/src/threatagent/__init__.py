"""Agentic threat-modeling engine grounded in STRIDE, MITRE ATT&CK,
CVE/NVD and NIST knowledge bases."""

__version__ = "0.1.0"
