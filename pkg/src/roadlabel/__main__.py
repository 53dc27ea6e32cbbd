import sys

from roadlabel.cli import main

sys.exit(main())
