import sys

from ebm_lab.cli import main

sys.exit(main())
