import sys

from fraccurv.cli import main

sys.exit(main())
