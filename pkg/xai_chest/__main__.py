import sys

from xai_chest.main import main

sys.exit(main())
