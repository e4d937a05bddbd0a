"""mtrace command-line application."""
from app.config import Config
from app.main import build_parser, main

# Export public interface
__all__ = ['Config', 'build_parser', 'main']
