"""Run the command-line front end without installing the package

    python client_script.py gen simple 100 -o simple_100.json
    python client_script.py solve -i simple_100.json -o solution.json --verify
    python client_script.py bench --min-n 100 --max-n 10000 -o bench.csv
"""
import sys

from retiming.cli import main

if __name__ == "__main__":
    sys.exit(main())
