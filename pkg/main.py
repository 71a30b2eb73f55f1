"""
cimsearch entry point

    python main.py search cimsearch/data/configs/tiny_search.yaml
"""

from cimsearch.commands.cli import main

if __name__ == "__main__":
    main()
