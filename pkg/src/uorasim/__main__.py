import sys

from uorasim.cli import main

sys.exit(main())
