"""
framelab - Main Entry Point
Runs preset experiments and config pipelines from the command line.
"""

from framelab.cli import main

if __name__ == "__main__":
    main()
