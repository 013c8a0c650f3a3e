"""Allow ``python -m landmark_rerank``."""

import sys

from .cli import main

sys.exit(main())
