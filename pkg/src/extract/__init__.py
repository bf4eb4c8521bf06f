"""Permission extraction from Android manifests (binary AXML and plain XML)."""
