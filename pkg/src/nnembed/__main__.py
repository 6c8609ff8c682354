import sys

from nnembed.cli import main

sys.exit(main())
