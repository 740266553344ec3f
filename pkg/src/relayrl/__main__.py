"""Module entry point so ``python -m relayrl`` matches the ``relayrl`` script."""

import sys

from .cli import main

sys.exit(main())
