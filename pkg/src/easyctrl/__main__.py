import sys

from easyctrl.cli import main

sys.exit(main())
