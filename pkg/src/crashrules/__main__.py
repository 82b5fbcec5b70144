import sys

from crashrules.cli import main

sys.exit(main())
