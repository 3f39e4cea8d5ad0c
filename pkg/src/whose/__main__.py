import sys

from whose.cli import main

sys.exit(main())
