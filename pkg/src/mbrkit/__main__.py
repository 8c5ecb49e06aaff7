"""Module entry point: python -m mbrkit."""

from .cli import main

if __name__ == "__main__":
    main()
