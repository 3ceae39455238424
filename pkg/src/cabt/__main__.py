import sys

from cabt.cli import main

sys.exit(main())
