"""Run report rendering."""
