import os
import sys

# make the sibling oracles module importable regardless of pytest rootdir
sys.path.insert(0, os.path.dirname(__file__))
