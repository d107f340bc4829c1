import sys

from signal_lab.main import main

sys.exit(main())
