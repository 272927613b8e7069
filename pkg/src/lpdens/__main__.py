import sys

from lpdens.cli import main

sys.exit(main())
