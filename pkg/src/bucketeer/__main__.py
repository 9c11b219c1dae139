import sys

from bucketeer.cli import main

sys.exit(main())
