import sys

from mfda.cli import main

sys.exit(main())
