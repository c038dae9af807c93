import sys

from mflqr.scripts.mflqr import main

sys.exit(main())
