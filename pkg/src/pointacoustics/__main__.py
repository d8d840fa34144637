from pointacoustics.cli import main
import sys

sys.exit(main())
