"""Entry point of agent subprocesses (``python -m agentrt.distribution.child``)."""

import sys

from .mirror import main

if __name__ == "__main__":
    sys.exit(main())
