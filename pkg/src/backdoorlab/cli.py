"""Command-line entry point.

    backdoorlab run <manifest.json> [--seed N] [--output-dir DIR] [--device D]
    backdoorlab validate <manifest.json>
    backdoorlab export-poison <manifest.json> [--seed N] [--output-dir DIR]

``run`` executes every stage of the manifest and writes all artifacts under
the output directory; ``validate`` checks the manifest without computing;
``export-poison`` only builds and exports the poisoned dataset.
"""

import argparse
import sys

from .experiment import (export_poison_only, load_manifest, run_experiment,
                         validate_manifest)


def _add_common(parser):
    parser.add_argument("manifest", help="path to the experiment manifest JSON")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the manifest seed")
    parser.add_argument("--output-dir", default=None,
                        help="override the manifest output directory")
    parser.add_argument("--device", choices=["CPU", "GPU"], default=None,
                        help="override the training device")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="backdoorlab",
        description="Backdoor attack/defense experiments from a JSON manifest")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute all manifest stages")
    _add_common(run_p)

    val_p = sub.add_parser("validate", help="check a manifest without computing")
    val_p.add_argument("manifest", help="path to the experiment manifest JSON")

    exp_p = sub.add_parser("export-poison",
                           help="build and export the poisoned dataset only")
    _add_common(exp_p)
    return parser


def _overrides(args):
    return {"seed": args.seed, "output_dir": args.output_dir,
            "device": args.device}


def main(argv=None):
    args = build_parser().parse_args(argv)
    manifest = load_manifest(args.manifest)

    if args.command == "validate":
        findings = validate_manifest(manifest)
        if findings:
            print(f"{len(findings)} finding(s):")
            for finding in findings:
                print(f"- {finding}")
            return 1
        print("manifest OK")
        return 0

    if args.command == "run":
        try:
            reports = run_experiment(manifest, _overrides(args), verbose=True)
        except ValueError as err:
            print(str(err), file=sys.stderr)
            return 1
        print(f"done: {len(reports)} report(s)")
        return 0

    if args.command == "export-poison":
        out = export_poison_only(manifest, _overrides(args), verbose=True)
        print(out)
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
