"""Exact group theory, simplicial geometry and controlled algebra."""
