import sys

from marketaudit.cli import main

sys.exit(main())
