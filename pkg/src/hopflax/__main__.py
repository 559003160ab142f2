import sys

from hopflax.cli import main

sys.exit(main())
