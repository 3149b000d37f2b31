import sys

from fibermi.experiments.cli import main

sys.exit(main())
