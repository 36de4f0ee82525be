import sys

from dirfixseq.cli import main

sys.exit(main())
