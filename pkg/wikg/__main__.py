import sys

from wikg.cli import main

sys.exit(main())
