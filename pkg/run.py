# run.py
import argparse
import os
import sys
from pathlib import Path
from dotenv import load_dotenv

# Add backend to path if needed
sys.path.insert(0, str(Path(__file__).parent))

from backend import ExperimentConfig, SolverOptions, TomographyProcessor
from backend.model_selection import DEFAULT_ALPHA

# Load environment variables
load_dotenv()


def parse_rank(value: str):
    """'auto' or a positive integer"""
    if value == "auto":
        return None
    try:
        rank = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"rank must be 'auto' or an integer, got '{value}'")
    if rank < 1:
        raise argparse.ArgumentTypeError("rank must be >= 1")
    return rank


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="fuzzytomo - SPAM-aware quantum process tomography",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog='''
Examples:
  python run.py simulate --config configs/calibration.yaml --out exports/empty
  python run.py calibrate --counts exports/empty/counts/n1000_trial0000.csv --out exports/calibration.yaml
  python run.py simulate --config config.yaml --out exports/hadamard
  python run.py reconstruct --counts exports/hadamard/counts --model gn --calibration exports/calibration.yaml
  python run.py report --results exports/gn --format csv --out exports/report
        '''
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Monte Carlo count files for a gate under a SPAM scenario")
    simulate.add_argument("--config", default="config.yaml", help="Experiment config (YAML)")
    simulate.add_argument("--seed", type=int, help="Override the experiment seed")
    simulate.add_argument("--out", help="Output directory")

    calibrate = sub.add_parser("calibrate", help="Empty-gate tomography from identity-gate counts")
    calibrate.add_argument("--counts", required=True, help="Count file taken with the empty gate")
    calibrate.add_argument("--config", help="Experiment config supplying solver options")
    calibrate.add_argument("--rank", type=parse_rank, default=None, help="auto or a fixed rank")
    calibrate.add_argument("--alpha", type=float, help=f"Significance level (default {DEFAULT_ALPHA})")
    calibrate.add_argument("--out", default=None, help="Calibration file to write")

    reconstruct = sub.add_parser("reconstruct", help="Maximum-likelihood reconstruction with rank selection")
    reconstruct.add_argument("--counts", required=True, help="Count file, directory or glob pattern")
    reconstruct.add_argument("--model", default="standard", choices=["standard", "gn", "ng", "ippm-true"],
                             help="Protocol model")
    reconstruct.add_argument("--calibration", help="Calibration file (gn and ng models)")
    reconstruct.add_argument("--config", help="Experiment config supplying solver options and scenario")
    reconstruct.add_argument("--rank", type=parse_rank, default=None, help="auto or a fixed rank")
    reconstruct.add_argument("--alpha", type=float, help=f"Significance level (default {DEFAULT_ALPHA})")
    reconstruct.add_argument("--out", help="Output directory (one subdirectory per model)")

    report = sub.add_parser("report", help="Histogram, fidelity, Pauli and ladder tables from result files")
    report.add_argument("--results", required=True, help="Result file directory or glob pattern")
    report.add_argument("--format", default="csv", choices=["csv", "structured"], help="Output format")
    report.add_argument("--out", help="Output directory")
    return parser


def load_config(path):
    if not path:
        return None
    return ExperimentConfig.from_yaml(path)


def finish(result):
    if result['success']:
        return
    print(f"\n❌ Processing failed: {result['error']}")
    if result.get('error_type') == 'ConfigError':
        print("\n💡 Check the config fields and command-line flags listed above.")
    sys.exit(result.get('exit_code', 1))


def main(argv=None):
    args = build_parser().parse_args(argv)
    processor = TomographyProcessor()

    try:
        config = load_config(getattr(args, "config", None))
        if args.command == "simulate" and args.seed is not None:
            config = config.with_overrides(seed=args.seed)
    except Exception as e:
        finish(processor.failure(e))
    alpha = getattr(args, "alpha", None)
    if alpha is None:
        alpha = config.alpha if config else DEFAULT_ALPHA

    if args.command == "simulate":
        total = len(config.sizes) * config.trials
        print(f"🔄 Simulating {total} count files for gate '{config.gate.name}' "
              f"({config.n_qubits} qubit(s), sizes {list(config.sizes)})...")
        result = processor.cmd_simulate(config, args.out)
        finish(result)
        print("\n✅ Simulation complete!")
        print(f"  Protocol: {result['protocol_file']}")
        print(f"  Count files: {len(result['files'])}")

    elif args.command == "calibrate":
        out = args.out or os.path.join(processor.output_dir, "calibration.yaml")
        opts = config.solver if config else SolverOptions()
        print(f"🔄 Calibrating from empty-gate counts {args.counts}...")
        result = processor.cmd_calibrate(args.counts, out, alpha=alpha, rank=args.rank, opts=opts)
        finish(result)
        print("\n✅ Calibration complete!")
        print(f"  Rank: {result['rank']}" + ("" if result['estimable'] else " (not estimable)"))
        print(f"  Empty-gate fidelity: {result['fidelity_identity']:.4%}")
        print(f"  File: {result['calibration_file']}")

    elif args.command == "reconstruct":
        print(f"🔄 Reconstructing {args.counts} with the {args.model} protocol...")
        result = processor.cmd_reconstruct(
            args.counts, args.model, out_path=args.out, calibration_path=args.calibration,
            alpha=alpha, rank=args.rank, config=config,
        )
        finish(result)
        print(f"\n✅ Reconstructed {result['stats']['reconstructed']} count file(s)")
        for path in result['files'][:5]:
            print(f"  {path}")
        if len(result['files']) > 5:
            print(f"  ... and {len(result['files']) - 5} more")

    elif args.command == "report":
        print(f"📊 Building {args.format} report from {args.results}...")
        result = processor.cmd_report(args.results, fmt=args.format, out_path=args.out)
        finish(result)
        print("\n✅ Report written:")
        for name, path in result['files'].items():
            print(f"  {name}: {path}")


if __name__ == "__main__":
    main()
