"""Bundled canonical game files; load paths via abgames.cli.bundled_fixture."""
