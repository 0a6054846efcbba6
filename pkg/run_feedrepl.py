#!/usr/bin/env python3
"""Entry point for the feed replication simulator.

Runs the ``feedrepl`` command line from a source checkout without
installing the package.
"""

import sys
from pathlib import Path

# Add the parent directory to path so we can import feed_repl
sys.path.insert(0, str(Path(__file__).parent))

from feed_repl.cli import main

if __name__ == "__main__":
    sys.exit(main())
