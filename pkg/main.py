"""
Entry point for the free-boundary toolkit.

    python main.py solve-dpp --config problem.json --out results/
"""
import os
import sys

# Add current directory to path to ensure imports work
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from runner.cli import main

if __name__ == "__main__":
    sys.exit(main())
