"""python -m trflow_plots series.csv --out fig.png
   python -m trflow_plots --order report.json [report2.json ...] --out fig.png
"""

import argparse
import json
import sys

from .plots import SeriesError, plot_order, plot_series


def main(argv=None):
    parser = argparse.ArgumentParser(prog='trflow_plots', description=__doc__)
    parser.add_argument('inputs', nargs='+', help='series CSV or check-report JSONs')
    parser.add_argument('--out', required=True, help='output image path')
    parser.add_argument('--order', action='store_true',
                        help='treat inputs as check-report JSONs')
    args = parser.parse_args(argv)
    try:
        if args.order:
            info = plot_order(args.inputs, args.out)
        else:
            if len(args.inputs) != 1:
                parser.error('series mode takes exactly one CSV')
            info = plot_series(args.inputs[0], args.out)
    except (SeriesError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(info))
    return 0


if __name__ == '__main__':
    sys.exit(main())
