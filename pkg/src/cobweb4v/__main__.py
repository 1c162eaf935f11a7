import sys

from cobweb4v.cli import main

sys.exit(main())
