import sys

from mqplan.bench.cli import main

sys.exit(main())
