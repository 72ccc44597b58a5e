import sys

from hypercpf.cli import main

sys.exit(main())
