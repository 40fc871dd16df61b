import sys

from gesturegate.cli import main

sys.exit(main())
