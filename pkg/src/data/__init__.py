"""Permission catalog, labeled feature matrices, CSV I/O and synthetic corpora."""
