"""Module entry point so ``python -m graphmarkov`` behaves like the
installed ``graphmarkov`` command."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
