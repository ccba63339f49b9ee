import sys
from pathlib import Path

# Make the sibling oracle/corpus modules importable regardless of rootdir.
sys.path.insert(0, str(Path(__file__).parent))
