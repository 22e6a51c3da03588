"""CSV/JSON artifact writers and their parsers."""
