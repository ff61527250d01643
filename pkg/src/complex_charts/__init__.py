"""Complex coordinates for integrable almost complex structures."""
