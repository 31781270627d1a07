import sys

from rpm3.cli import main

sys.exit(main())
