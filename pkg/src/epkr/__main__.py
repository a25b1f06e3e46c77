import sys

from epkr.cli import main

sys.exit(main())
